"""Mesh generators, face geometry, normals and the mesh file format."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from lorfv.errors import (BadDimensions, MeshParseError, MeshStructureError, NonMonotoneGrid,
                          ShearTooLarge)
from lorfv.geometry import burgers, constant_x, flrw_exp, flrw_linear, minkowski
from lorfv.mesh import build_nonuniform_time, build_sheared, build_uniform, wrap
from lorfv.meshio import assemble, causal_mismatches, format_mesh, parse_mesh, read_mesh, write_mesh


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def test_uniform_minkowski_measures():
    m = build_uniform(minkowski(), 4, 2, 0.2)
    np.testing.assert_allclose(m.volume, 0.025, rtol=1e-14)
    np.testing.assert_allclose(m.e_plus, 0.25, rtol=1e-14)
    np.testing.assert_allclose(m.e_minus, 0.25, rtol=1e-14)
    np.testing.assert_allclose(m.tau_K, 0.1, rtol=1e-14)
    np.testing.assert_allclose(m.lat_measure, 0.1, rtol=1e-14)
    assert m.n_elements == 8 and m.n_slices == 2


def test_flrw_face_measure_is_scale_factor_times_width():
    m = build_uniform(flrw_linear(), 2, 1, 1.0)
    top = m.out_face[m.slices[0]]
    np.testing.assert_allclose(m.faces.measure[top], 1.0, rtol=1e-14)


def test_nonuniform_time_layers():
    m = build_nonuniform_time(minkowski(), 4, [0.0, 0.1, 0.25])
    np.testing.assert_allclose(m.slice_tau, [0.1, 0.15], rtol=1e-14)
    assert m.t_n[2] == pytest.approx(0.25, abs=1e-15)


def test_single_layer_equals_uniform():
    a = build_nonuniform_time(minkowski(), 6, [0.0, 0.1])
    b = build_uniform(minkowski(), 6, 1, 0.1)
    np.testing.assert_array_equal(a.volume, b.volume)
    np.testing.assert_array_equal(a.faces.measure, b.faces.measure)
    np.testing.assert_array_equal(a.lat_nbr, b.lat_nbr)


def test_element_and_slice_counts():
    m = build_nonuniform_time(minkowski(), 8, [0.0, 0.05, 0.1, 0.2])
    assert m.n_elements == 24
    assert [len(s) for s in m.slices] == [8, 8, 8]


def test_generator_errors():
    with pytest.raises(BadDimensions):
        build_uniform(minkowski(), 1, 2, 0.1)
    with pytest.raises(BadDimensions):
        build_uniform(minkowski(), 4, 0, 0.1)
    with pytest.raises(NonMonotoneGrid):
        build_nonuniform_time(minkowski(), 4, [0.0, 0.2, 0.1])
    with pytest.raises(ShearTooLarge):
        build_sheared(minkowski(), 4, 40, 1.0, 1.5)


def test_zero_shear_is_uniform():
    a = build_sheared(minkowski(), 8, 4, 0.4, 0.0)
    b = build_uniform(minkowski(), 8, 4, 0.4)
    np.testing.assert_allclose(a.volume, b.volume, rtol=1e-14)
    np.testing.assert_allclose(a.faces.measure, b.faces.measure, rtol=1e-14)


def test_sheared_lateral_faces_are_timelike():
    s, dt = 0.3, 0.05
    m = build_sheared(minkowski(), 8, 4, 4 * dt, s)
    lat = np.unique(m.lat_face)
    # chart tangent (dt, s dt): g = -dt^2 + s^2 dt^2
    np.testing.assert_allclose(m.faces.tangent_norm[lat], (-1 + s * s) * dt * dt, rtol=1e-12)
    np.testing.assert_allclose(m.faces.measure[lat], np.sqrt(1 - s * s) * dt, rtol=1e-12)


def test_element_volume_against_scipy():
    g = flrw_exp(0.8)
    m = build_nonuniform_time(g, 5, [0.0, 0.3, 0.7])
    k = m.slices[1][2]
    a = lambda t: np.exp(0.8 * t)
    oracle, _ = integrate.dblquad(lambda t, x: a(t), 0.4, 0.6, 0.3, 0.7)
    assert m.volume[k] == pytest.approx(oracle, rel=1e-12)


def test_normals_are_unit_and_past_directed_on_spacelike_faces():
    for m in (build_uniform(flrw_linear(), 6, 3, 0.6),
              build_sheared(minkowski(), 8, 8, 0.4, 0.3, alternating=True)):
        assert m.check_normals()


def test_wrap_range():
    x = np.array([-0.5, 0.49, 0.5, 0.75, -0.75])
    np.testing.assert_allclose(wrap(x, 1.0), [0.5, 0.49, 0.5, -0.25, 0.25])


@given(st.integers(3, 12), st.integers(1, 5), st.floats(-0.4, 0.4), st.booleans())
def test_lateral_incidences_pair_up(nx, nt, shear, alternating):
    T = 0.5 * nt / nx
    m = build_sheared(minkowski(), nx, nt, T, shear, alternating=alternating)
    twin = m.lat_twin
    np.testing.assert_array_equal(m.lat_face[twin], m.lat_face)
    np.testing.assert_array_equal(m.lat_sign[twin], -m.lat_sign)
    np.testing.assert_array_equal(m.lat_elem[twin], m.lat_nbr)
    # discrete divergence theorem for a constant field on flat space
    d = m.boundary_flux(np.arange(m.n_elements), constant_x(0.7), np.full(m.n_elements, 0.4))
    assert np.abs(d).max() <= 1e-14


@given(st.integers(3, 10), st.integers(1, 4))
def test_slice_lengths_add_up_to_the_period(nx, nt):
    m = build_uniform(minkowski(), nx, nt, 0.1 * nt)
    for n in range(m.n_slices):
        assert m.slice_length(n) == pytest.approx(1.0, abs=1e-13)


# ---------------------------------------------------------------------------
# mesh files
# ---------------------------------------------------------------------------

SMALL = """lorfv-mesh 1
# two cells, one layer
vertex 0 0 0
vertex 1 0 0.5
vertex 2 0.1 0
vertex 3 0.1 0.5
face 10 inflow 0 1
face 11 inflow 1 0
face 12 outflow 2 3
face 13 outflow 3 2
face 20 lateral 0 2
face 21 lateral 1 3
element 100 10 12 20 21
element 101 11 13 21 20
slice 0 100 101
"""


def test_parse_small_mesh():
    m = assemble(parse_mesh(SMALL))
    assert m.n_elements == 2
    np.testing.assert_allclose(m.volume, 0.05, rtol=1e-14)
    assert list(m.element_ids) == [100, 101]
    assert causal_mismatches(m) == []


def test_round_trip_preserves_geometry(tmp_path):
    for m in (build_uniform(flrw_exp(0.5), 6, 3, 0.3),
              build_sheared(minkowski(), 8, 4, 0.2, 0.3, alternating=True)):
        path = tmp_path / "m.lorfv-mesh"
        write_mesh(m, path)
        m2 = read_mesh(path)
        assert m2.metric.name == m.metric.name
        np.testing.assert_allclose(m2.volume, m.volume, rtol=1e-13)
        np.testing.assert_allclose(m2.faces.measure, m.faces.measure, rtol=1e-13)
        np.testing.assert_array_equal(m2.lat_nbr, m.lat_nbr)
        np.testing.assert_array_equal(m2.lat_sign, m.lat_sign)
        assert format_mesh(m2) == format_mesh(m)


@pytest.mark.parametrize("text", [
    "",
    "lorfv-mesh 2\n",
    SMALL.replace("vertex 3 0.1 0.5", "vertex 3 0.1"),
    SMALL.replace("face 13 outflow", "face 13 sideways"),
    SMALL.replace("element 101 11 13 21 20", "element 101 11 13 21 99"),
    SMALL.replace("slice 0", "slice 1"),
    SMALL + "polygon 1 2 3\n",
    SMALL.replace("vertex 0 0 0", "vertex a 0 0"),
])
def test_parse_errors(text):
    with pytest.raises(MeshParseError):
        assemble(parse_mesh(text))


def test_missing_mesh_file(tmp_path):
    with pytest.raises(MeshParseError):
        read_mesh(tmp_path / "nope.mesh")


def test_structure_error_for_lateral_declared_as_outflow():
    text = SMALL.replace("face 21 lateral", "face 21 outflow")
    with pytest.raises(MeshStructureError):
        assemble(parse_mesh(text))


def test_causal_mismatch_is_reported():
    # lateral faces tilted beyond the light cone become space-like
    text = SMALL.replace("vertex 2 0.1 0", "vertex 2 0.1 0.3").replace(
        "vertex 3 0.1 0.5", "vertex 3 0.1 0.8")
    m = assemble(parse_mesh(text))
    bad = causal_mismatches(m)
    assert {c.face_id for c in bad} == {20, 21}
    assert all(c.declared == "lateral" and c.computed == "spacelike" for c in bad)


def test_cfl_independent_of_file_round_trip(tmp_path):
    from lorfv.admissibility import cfl_report
    m = build_uniform(minkowski(), 16, 8, 0.25)
    write_mesh(m, tmp_path / "u.mesh")
    m2 = read_mesh(tmp_path / "u.mesh")
    assert cfl_report(m2, burgers()).max_ratio == pytest.approx(cfl_report(m, burgers()).max_ratio)
