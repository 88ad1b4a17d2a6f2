import numpy as np
import pytest

from vemfhn.errors import UndefinedErrorMetric
from vemfhn.experiments import (EXAMPLE1_SOFT_TARGETS, ErrorReport, compute_reference,
                                discrete_relative_error, example_model, make_mesh,
                                observed_order, reference_interpolant, run_example1,
                                run_example2, run_example3, run_temporal_study)
from vemfhn.assembly import build_mesh_operators, assemble_global, interpolate
from vemfhn.mesh import generate_square_mesh
from vemfhn.vem_local import build_element_operators


@pytest.fixture(scope="module")
def unit_mass():
    m = generate_square_mesh(1)
    _, M = assemble_global(m, build_mesh_operators(m))
    return m, M


def test_error_identical_and_scaled(unit_mass):
    _, M = unit_mass
    u = np.array([1.0, 2.0, 0.5, -1.0])
    assert discrete_relative_error(u, u, M) == 0.0
    assert discrete_relative_error(2 * u, u, M) == pytest.approx(1.0)
    for c in (-3.0, 0.1, 7.0):
        a = np.array([0.3, 1.0, 2.0, 0.0])
        assert discrete_relative_error(c * a, c * u, M) == pytest.approx(
            discrete_relative_error(a, u, M))


def test_error_single_cell_oracle(unit_mass):
    m, M = unit_mass
    # dense local mass in the cell's own vertex order
    loc = build_element_operators(m.cell(0)).mass
    ids = m.cell_vertex_ids(0)
    wI = np.ones(4)
    wh = np.ones(4)
    wh[ids[3]] = 0.0
    e = np.zeros(4)
    e[3] = 1.0  # local position of the zeroed vertex
    expected = np.sqrt(e @ loc @ e / (np.ones(4) @ loc @ np.ones(4)))
    assert discrete_relative_error(wh, wI, M) == pytest.approx(expected, rel=1e-14)


def test_error_zero_reference(unit_mass):
    _, M = unit_mass
    with pytest.raises(UndefinedErrorMetric):
        discrete_relative_error(np.ones(4), np.zeros(4), M)
    with pytest.raises(ValueError):
        discrete_relative_error(np.ones(3), np.ones(4), M)


def test_observed_order():
    h = np.array([1 / 8, 1 / 16, 1 / 32])
    assert observed_order(h, 3 * h ** 2) == pytest.approx(2.0)
    assert np.isnan(observed_order(h, [1.0, 0.0, 1.0]))


def test_error_report_orders():
    levels, steps = [8, 16, 32], [10, 20]
    hs = 1 / np.array(levels, float)
    dts = 1 / np.array(steps, float)
    E = hs[:, None] ** 2 + dts[None, :]
    rep = ErrorReport(levels, steps, 1.0, E, 2 * E)
    assert np.allclose(rep.hs, hs) and np.allclose(rep.dts, dts)
    assert rep.temporal_orders("v", row=0)[0] < 1.0
    assert np.all(rep.spatial_orders("w", column=-1) > 0)
    assert rep.table("w") is rep.E_w
    with pytest.raises(ValueError):
        rep.table("u")
    rep.soft_targets = dict(EXAMPLE1_SOFT_TARGETS)
    assert rep.soft_target_rows() == [(8, 10, 0.039090164250364, E[0, 0])]


def test_make_mesh_families():
    assert make_mesh("squares", 4).n_cells == 16
    assert make_mesh("distorted", 4).n_cells == 16
    assert make_mesh("voronoi", 4).n_cells == 16
    with pytest.raises(ValueError):
        make_mesh("hexagons", 4)


@pytest.fixture(scope="module")
def small_reference():
    return compute_reference(example_model(1), 16, 40, T=0.25)


def test_reference_interpolant_exact_at_shared_vertices(small_reference):
    coarse = generate_square_mesh(4)
    vI, wI = reference_interpolant(small_reference, coarse)
    fine = small_reference.mesh
    idx = [int(np.argmin(np.hypot(*(fine.vertices - p).T))) for p in coarse.vertices]
    assert np.array_equal(vI, small_reference.v[idx])
    assert np.array_equal(wI, small_reference.w[idx])


def test_run_example1_small(small_reference):
    rep = run_example1(levels=[4, 8], timesteps=[0.0625, 20], T=0.25,
                       reference=small_reference)
    assert rep.E_v.shape == (2, 2) and np.all(rep.E_v >= 0) and np.all(rep.E_w >= 0)
    assert rep.steps == [4, 20]
    assert rep.reference["n"] == 16


def test_run_example1_rejects_bad_grids(small_reference):
    with pytest.raises(ValueError):
        run_example1(levels=[16], timesteps=[10], T=0.25, reference=small_reference)
    with pytest.raises(ValueError):
        run_example1(levels=[8], timesteps=[80], T=0.25, reference=small_reference)
    with pytest.raises(ValueError):
        run_example1(levels=[6], timesteps=[10], T=0.25, reference=small_reference,
                     mesh_family="squares")
    with pytest.raises(ValueError):
        run_example1(levels=[4], timesteps=[10], T=0.5, reference=small_reference)


def test_example2_initial_snapshot_and_causality():
    forced = run_example2(n=8, N_per_unit=10, T=4.2, times=(1.0, 2.0, 3.9, 4.1))
    free = run_example2(n=8, N_per_unit=10, T=4.2, times=(1.0, 2.0, 3.9, 4.1), stimulus=False)
    v0 = interpolate(forced.mesh, example_model(2).initial.v0)
    assert forced.times[0] == 0.0 and np.array_equal(forced.states[0].v, v0)
    for t, a, b in zip(forced.times, forced.states, free.states):
        if t < 4.0:
            assert np.array_equal(a.v, b.v) and np.array_equal(a.w, b.w)
    assert not np.array_equal(forced.state_at(4.1).v, free.state_at(4.1).v)
    lo, hi = forced.range_v
    assert -1.0 <= lo and hi <= 2.0


def test_example3_initial_and_control():
    ser = run_example3(n=6, N_per_unit=20, T=0.5, mesh_family="squares", times=(0.1, 0.5))
    m = ser.mesh
    x, y = m.vertices.T
    expect = np.where((x < 0.5) & (y < 0.5), 1.4, 0.0)
    assert np.array_equal(ser.states[0].v, expect)
    assert np.all(np.isfinite(ser.std_v))
    assert len(ser.sign_persistence()) == len(ser.states) - 1
    ctrl = run_example3(n=6, N_per_unit=20, T=0.5, mesh_family="voronoi", constant=(0.3, 0.1),
                        times=(0.1, 0.5))
    assert np.all(ctrl.std_v < 1e-9)
    with pytest.raises(KeyError):
        ctrl.state_at(0.33)


def test_temporal_study_small():
    rep = run_temporal_study(n=4, timesteps=[2, 4, 8], ref_N=64, T=0.25)
    assert rep.E_v.shape == (1, 3)
    assert np.all(np.diff(rep.E_v[0]) < 0)
    assert 0.5 < rep.temporal_order("v") < 1.5
    with pytest.raises(ValueError):
        run_temporal_study(n=4, timesteps=[64], ref_N=64, T=0.25)
