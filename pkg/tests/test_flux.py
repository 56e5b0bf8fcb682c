"""Face averages, their inversion and the Lax-Friedrichs flux."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import left_incidence, right_incidence
from lorfv.errors import DTooSmall, OutOfRange
from lorfv.flux import LaxFriedrichs, lax_friedrichs, mu, mu_inverse, verify_flux_axioms
from lorfv.geometry import burgers, constant_x, flrw_compatible, flrw_linear, minkowski
from lorfv.mesh import build_nonuniform_time, build_uniform


def lf_oracle(u, v, D):
    """Brute-force Lax-Friedrichs for Burgers on a uniform flat mesh, right face."""
    return 0.5 * (0.5 * u * u + 0.5 * v * v) + 0.5 * D * (u - v)


# ---------------------------------------------------------------------------
# face averages
# ---------------------------------------------------------------------------

def test_mu_on_inflow_face_is_identity(four_cells):
    m = four_cells
    u = np.linspace(-1, 1, 7)
    np.testing.assert_allclose(mu(m, m.in_face[0], 0, burgers(), u), u, atol=1e-15)


def test_mu_on_right_lateral_face_is_x_flux(four_cells):
    m = four_cells
    i = right_incidence(m, 0)
    u = np.linspace(-1, 1, 7)
    np.testing.assert_allclose(mu(m, m.lat_face[i], 0, burgers(), u), 0.5 * u * u, atol=1e-15)
    j = left_incidence(m, 0)
    np.testing.assert_allclose(mu(m, m.lat_face[j], 0, burgers(), u), -0.5 * u * u, atol=1e-15)


def test_mu_flrw_compatible_at_t_one():
    g = flrw_linear()
    m = build_nonuniform_time(g, 4, [1.0, 1.1])
    u = np.array([-0.3, 0.1, 0.4])
    np.testing.assert_allclose(mu(m, m.in_face[0], 0, flrw_compatible(g), u), u / 2, atol=1e-15)


def test_mu_inverse_examples(four_cells):
    # outward normal on the outflow face is future-directed: mu = -u
    assert mu_inverse(four_cells, four_cells.out_face[0], 0, burgers(), -0.3) == pytest.approx(0.3, abs=1e-13)
    g = flrw_linear()
    m = build_nonuniform_time(g, 4, [0.9, 1.0])
    assert mu_inverse(m, m.out_face[0], 0, flrw_compatible(g), -0.3) == pytest.approx(0.6, abs=1e-12)


@given(st.lists(st.floats(-0.4, 0.4), min_size=1, max_size=100))
def test_mu_inverse_round_trip(values):
    g = flrw_linear()
    m = build_nonuniform_time(g, 4, [0.5, 0.75])
    f = flrw_compatible(g)
    u = np.array(values)
    face = m.in_face[1]
    back = mu_inverse(m, face, 1, f, mu(m, face, 1, f, u))
    np.testing.assert_allclose(back, u, atol=1e-10)


def test_mu_inverse_out_of_range(four_cells):
    with pytest.raises(OutOfRange):
        mu_inverse(four_cells, four_cells.out_face[0], 0, burgers(), 5.0)


# ---------------------------------------------------------------------------
# Lax-Friedrichs flux
# ---------------------------------------------------------------------------

def test_lax_friedrichs_example(four_cells):
    i = right_incidence(four_cells, 0)
    q = lax_friedrichs(four_cells, i, burgers(), 1.0, 0.0, 1.25)
    assert q == pytest.approx(0.875, abs=1e-15)
    assert q == pytest.approx(lf_oracle(1.0, 0.0, 1.25), abs=1e-15)


def test_lax_friedrichs_rejects_small_D(four_cells):
    q = LaxFriedrichs(four_cells, burgers())
    with pytest.raises(DTooSmall):
        LaxFriedrichs(four_cells, burgers(), D=0.5 * q.D_min.min())
    with pytest.raises(DTooSmall):
        lax_friedrichs(four_cells, 0, burgers(), 1.0, 0.0, 0.1)


def test_default_D_is_the_lower_bound(four_cells):
    q = LaxFriedrichs(four_cells, burgers())
    # max(|e+|/|d0K|, sup|u| / 1) = max(0.25/0.2, 1)
    np.testing.assert_allclose(q.D, 1.25, rtol=1e-14)


def test_consistency_on_uniform_mesh(four_cells):
    q = LaxFriedrichs(four_cells, burgers())
    inc = np.arange(len(four_cells.lat_face))
    U = np.broadcast_to(np.linspace(-1, 1, 11), (len(inc), 11))
    assert np.abs(q.consistency_defect(inc, U)).max() == 0.0


@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=100))
def test_conservation_of_the_flux(pairs):
    m = build_uniform(flrw_linear(), 6, 2, 0.2)
    f = flrw_compatible(m.metric)
    q = LaxFriedrichs(m, f, u_range=(-0.4, 0.4))
    u, v = (0.4 * np.array(c) for c in zip(*pairs))
    inc = np.resize(np.arange(len(m.lat_face)), len(u))
    np.testing.assert_allclose(q(inc, u, v) + q(m.lat_twin[inc], v, u), 0.0, atol=1e-14)


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_matches_bruteforce_formula(u, v):
    m = build_uniform(minkowski(), 4, 1, 0.1)
    q = LaxFriedrichs(m, burgers(), D=1.25)
    i = right_incidence(m, 0)
    assert q(np.array(i), u, v) == pytest.approx(lf_oracle(u, v, 1.25), abs=1e-14)


def test_axioms_hold_for_default_flux(four_cells):
    rep = verify_flux_axioms(LaxFriedrichs(four_cells, burgers()), np.linspace(-1, 1, 9))
    assert rep.ok
    assert rep.consistency <= 1e-12 and rep.conservation <= 1e-12
    assert rep.min_dq_du >= 0 and rep.max_dq_dv <= 0


def test_zero_diffusion_breaks_monotonicity(four_cells):
    q = LaxFriedrichs(four_cells, burgers(), D=0.0, check=False)
    rep = verify_flux_axioms(q, np.linspace(-1, 1, 9))
    assert not rep.monotone
    # d_u q = u / 2 on the right face reaches -1/2
    assert rep.min_dq_du == pytest.approx(-0.5, abs=1e-6)


def test_constant_flux_is_pure_diffusion(four_cells):
    q = LaxFriedrichs(four_cells, constant_x(0.3), D=0.8, check=False)
    i = right_incidence(four_cells, 0)
    u, v = 0.6, -0.2
    assert q(np.array(i), u, v) == pytest.approx(0.3 + 0.4 * (u - v), abs=1e-15)
    rep = verify_flux_axioms(q, np.linspace(-1, 1, 5))
    assert rep.consistency == 0.0


def test_axioms_on_curved_background():
    g = flrw_linear()
    m = build_uniform(g, 8, 4, 0.4)
    rep = verify_flux_axioms(LaxFriedrichs(m, flrw_compatible(g)), np.linspace(-0.4, 0.4, 9))
    assert rep.monotone and rep.conservation <= 1e-12
    assert rep.generalized_consistency <= 1e-12


def test_warm_started_inversion_returns_exact_roots(flrw_mesh, flrw_flux):
    from lorfv.flux import invert_ref
    faces = flrw_mesh.out_face[:50]
    u = np.linspace(-0.35, 0.35, 50)
    y = flrw_mesh.mu_ref(faces, flrw_flux, u)
    np.testing.assert_array_equal(invert_ref(flrw_mesh, faces, flrw_flux, y, guess=u), u)
    np.testing.assert_allclose(invert_ref(flrw_mesh, faces, flrw_flux, y), u, atol=1e-11)
