"""CFL ratios and the Cartesian deviation checker."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lorfv.admissibility import cartesian_deviation, cfl_report, default_probes
from lorfv.errors import EmptyRange
from lorfv.geometry import burgers, constant_x, flrw_compatible, flrw_linear, minkowski
from lorfv.mesh import build_nonuniform_time, build_sheared, build_uniform


def smooth_time_grid(nx):
    """Layer times ``t + 0.1 sin(pi t) / pi`` on ``nx/2`` layers up to 1."""
    t = np.linspace(0.0, 1.0, nx // 2 + 1)
    return t + 0.1 * np.sin(np.pi * t) / np.pi


# ---------------------------------------------------------------------------
# CFL
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("nt,expected", [(16, 0.5), (4, 2.0)])
def test_cfl_ratio_burgers(nt, expected):
    # 2 dt / dx with dx = 1/8, dt = 1/(2 nt) and sup |u| = 1
    m = build_uniform(minkowski(), 8, nt, 0.5)
    rep = cfl_report(m, burgers())
    assert rep.max_ratio == pytest.approx(expected, rel=1e-12)
    assert rep.ok == (expected <= 1)


def test_cfl_ratio_vanishes_without_lateral_speed():
    rep = cfl_report(build_uniform(minkowski(), 8, 1, 1.0), constant_x(0.5))
    assert rep.max_ratio == 0.0 and rep.ok


def test_cfl_empty_range():
    with pytest.raises(EmptyRange):
        cfl_report(build_uniform(minkowski(), 4, 1, 0.1), burgers(), u_range=(0.5, 0.5))


@given(st.integers(4, 32), st.integers(1, 8), st.floats(0.1, 1.0))
def test_cfl_ratio_scales_with_dt_over_dx(nx, nt, amp):
    T = 0.25 * nt / nx
    rep = cfl_report(build_uniform(minkowski(), nx, nt, T), burgers(), u_range=(-amp, amp))
    # |d0K| / |e+| = 2 dt / dx, sup |mu'| = amp on the lateral faces
    assert rep.max_ratio == pytest.approx(2 * amp * (T / nt) * nx, rel=1e-10)


def test_cfl_on_flrw_uses_outflow_slope(flrw_mesh, flrw_flux):
    rep = cfl_report(flrw_mesh, flrw_flux)
    assert 0 < rep.max_ratio < 1
    assert rep.ratios.shape == (flrw_mesh.n_elements,)


# ---------------------------------------------------------------------------
# Cartesian deviation
# ---------------------------------------------------------------------------

def test_uniform_mesh_has_no_deviation():
    for g in (minkowski(), flrw_linear()):
        rep = cartesian_deviation(build_uniform(g, 16, 8, 0.5))
        if g.name == "minkowski":
            assert rep.aggregate <= 1e-12
            assert rep.eta <= 1e-12
        assert rep.ok


def test_initial_layer_is_skipped():
    rep = cartesian_deviation(build_uniform(minkowski(), 12, 5, 0.5))
    assert rep.skipped_initial == 12
    assert len(rep.pair_elements) == 48


def test_alternating_shear_tangent_residual():
    s, nx = 0.3, 16
    rep = cartesian_deviation(build_sheared(minkowski(), nx, 2 * nx, 1.0, s, alternating=True))
    assert rep.ex4_residual.max() == pytest.approx(2 * s / np.sqrt(1 - s * s), rel=1e-6)
    assert not rep.ok


@pytest.mark.parametrize("nx", [16, 32, 64])
def test_alternating_shear_rejected(nx):
    rep = cartesian_deviation(build_sheared(minkowski(), nx, 2 * nx, 1.0, 0.3, alternating=True))
    assert rep.eta > rep.threshold
    assert not rep.ok


def test_constant_shear_passes():
    rep = cartesian_deviation(build_sheared(minkowski(), 32, 64, 1.0, 0.3))
    assert rep.eta <= 1e-12
    assert rep.ok


def test_smooth_time_grid_passes_with_decreasing_eta():
    etas = []
    for nx in (16, 32, 64):
        rep = cartesian_deviation(build_nonuniform_time(flrw_linear(), nx, smooth_time_grid(nx)))
        assert rep.ok
        etas.append(rep.eta)
    assert etas[0] > etas[1] > etas[2]


def test_probe_fields_have_unit_sup_norm():
    t = np.linspace(0, 1, 50)
    x = np.linspace(0, 1, 50)
    for p in default_probes():
        a, b = (np.broadcast_to(c, t.shape) for c in p(t, x))
        assert max(np.abs(a).max(), np.abs(b).max()) == pytest.approx(1.0, abs=1e-3)
