import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial.legendre import leggauss

from conftest import random_polygon
from vemfhn.errors import DegenerateCellError, UnsupportedKineticsError
from vemfhn.mesh import Cell, PolygonalMesh, generate_square_mesh
from vemfhn.model import KINETICS_PRESETS, IonicKinetics
from vemfhn.vem_local import (ScaledMonomialBasis, build_element_operators,
                              build_energy_projector, build_l2_projector, build_local_mass,
                              build_local_stiffness, fan_quadrature, integrate_polynomial,
                              local_gating_form, local_ionic_form, triangle_rule)


def make_cell(coords):
    m = PolygonalMesh(np.asarray(coords, float), [list(range(len(coords)))], validate=False)
    return m.cell(0)


UNIT = make_cell([[0, 0], [1, 0], [1, 1], [0, 1]])


def green_integral(coords, p, q):
    """Integral of x^p y^q over a polygon as the boundary integral of x^(p+1) y^q / (p+1) dy,
    evaluated edge by edge with Gauss-Legendre (exact for the polynomial trace)."""
    t, w = leggauss(max(2, (p + q + 2) // 2 + 1))
    s = 0.5 * (t + 1)
    total = 0.0
    for a, b in zip(coords, np.roll(coords, -1, axis=0)):
        x = a[0] + s * (b[0] - a[0])
        y = a[1] + s * (b[1] - a[1])
        total += 0.5 * np.dot(w, x ** (p + 1) * y ** q / (p + 1)) * (b[1] - a[1])
    return total


def linear_dofs(coords, c0, gx, gy):
    return c0 + gx * coords[:, 0] + gy * coords[:, 1]


def test_basis_at_centroid():
    b = ScaledMonomialBasis(np.array([0.3, 0.4]), 0.7)
    assert np.allclose(b([0.3, 0.4]), [[1, 0, 0]])
    assert b.size == 3
    with pytest.raises(NotImplementedError):
        ScaledMonomialBasis(np.zeros(2), 1.0, degree=2)


def test_triangle_rule_exact_to_degree_five():
    pts, w = triangle_rule()
    assert w.sum() == pytest.approx(0.5)
    for a in range(6):
        for b in range(6 - a):
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            assert np.dot(w, pts[:, 0] ** a * pts[:, 1] ** b) == pytest.approx(exact, rel=1e-13)


def test_integrate_polynomial_unit_square():
    assert integrate_polynomial(UNIT, {(0, 0): 1.0}) == pytest.approx(1.0, rel=1e-13)
    assert integrate_polynomial(UNIT, {(1, 0): 1.0}) == pytest.approx(0.5, rel=1e-13)
    assert integrate_polynomial(UNIT, {(2, 2): 1.0}) == pytest.approx(1 / 9, rel=1e-13)
    assert integrate_polynomial(UNIT, lambda x, y: x * y) == pytest.approx(0.25, rel=1e-13)


def test_integrate_polynomial_rejects_high_degree():
    with pytest.raises(ValueError):
        integrate_polynomial(UNIT, {(3, 2): 1.0})
    with pytest.raises(TypeError):
        integrate_polynomial(UNIT, [1, 2])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_integrate_polynomial_matches_green(seed):
    rng = np.random.default_rng(seed)
    cell = make_cell(random_polygon(rng, center=rng.uniform(-1, 1, 2)))
    for p in range(5):
        for q in range(5 - p):
            ref = green_integral(cell.coords, p, q)
            got = integrate_polynomial(cell, {(p, q): 1.0})
            assert got == pytest.approx(ref, rel=1e-11, abs=1e-13)


def test_fan_quadrature_nonconvex():
    # L-shape: the centroid fan has a negatively oriented triangle
    coords = np.array([[0, 0], [2, 0], [2, 0.2], [0.2, 0.2], [0.2, 2], [0, 2]], float)
    cell = make_cell(coords)
    pts, w = fan_quadrature(coords, cell.centroid)
    assert w.sum() == pytest.approx(cell.area)
    assert np.dot(w, pts[:, 0] ** 2 * pts[:, 1]) == pytest.approx(green_integral(coords, 2, 1))


def test_projector_constant_and_x():
    P = build_energy_projector(UNIT)
    assert np.allclose(P @ np.ones(4), [1, 0, 0], atol=1e-14)
    # x = 0.5 + h * (x - 0.5) / h with h = sqrt 2
    x = UNIT.coords[:, 0]
    assert np.allclose(P @ x, [0.5, math.sqrt(2), 0], atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_projector_reproduces_linears(seed):
    rng = np.random.default_rng(seed)
    cell = make_cell(random_polygon(rng))
    ops = build_element_operators(cell)
    c0, gx, gy = rng.normal(size=3)
    dofs = linear_dofs(cell.coords, c0, gx, gy)
    assert np.allclose(ops.dof_matrix @ ops.energy_projector @ dofs, dofs, atol=1e-12)
    assert np.allclose(ops.l2_projector, ops.energy_projector, atol=1e-12)


def test_projector_on_voronoi_cells(voronoi64):
    rng = np.random.default_rng(0)
    for k in range(voronoi64.n_cells):
        cell = voronoi64.cell(k)
        P = build_energy_projector(cell)
        dofs = linear_dofs(cell.coords, *rng.normal(size=3))
        D = ScaledMonomialBasis(cell.centroid, cell.diameter)(cell.coords)
        assert np.max(np.abs(D @ P @ dofs - dofs)) < 1e-12


def test_l2_projector_copy():
    P = build_energy_projector(UNIT)
    P0 = build_l2_projector(UNIT, P)
    assert P0 is not P and np.array_equal(P0, P)
    assert np.allclose(P0 @ np.ones(4), [1, 0, 0])


def test_degenerate_cell():
    coords = np.array([[0, 0], [1, 0], [2, 0]], float)
    cell = Cell(np.arange(3), coords, 0.0, np.array([1.0, 0.0]), 2.0)
    with pytest.raises(DegenerateCellError):
        build_energy_projector(cell)


def test_stiffness_unit_square():
    ops = build_element_operators(UNIT)
    x = UNIT.coords[:, 0]
    assert x @ ops.stiffness @ x == pytest.approx(1.0, abs=1e-13)
    assert np.allclose(ops.stiffness.sum(axis=1), 0, atol=1e-12)


def test_mass_unit_square():
    ops = build_element_operators(UNIT)
    one = np.ones(4)
    x, y = UNIT.coords[:, 0], UNIT.coords[:, 1]
    assert one @ ops.mass @ one == pytest.approx(1.0, abs=1e-14)
    assert x @ ops.mass @ y == pytest.approx(0.25, abs=1e-14)


def boundary_flux(coords, gx, gy, phi):
    """Integral of grad(p) . grad(phi) = boundary integral of (grad p . n) phi for linear p,
    with phi linear along each edge."""
    total = 0.0
    n = len(coords)
    for i in range(n):
        a, b = coords[i], coords[(i + 1) % n]
        e = b - a
        # outward normal times edge length for a CCW polygon
        nl = np.array([e[1], -e[0]])
        total += (gx * nl[0] + gy * nl[1]) * 0.5 * (phi[i] + phi[(i + 1) % n])
    return total


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_stiffness_and_mass_consistency(seed):
    rng = np.random.default_rng(seed)
    cell = make_cell(random_polygon(rng, radius=rng.uniform(0.1, 3)))
    ops = build_element_operators(cell)
    gp = rng.normal(size=3)
    gq = rng.normal(size=3)
    p = linear_dofs(cell.coords, *gp)
    q = linear_dofs(cell.coords, *gq)
    phi = rng.normal(size=cell.n_vertices)
    scale = 1.0 + np.abs(phi).max() * np.abs(gp).max()
    assert abs(p @ ops.stiffness @ phi - boundary_flux(cell.coords, gp[1], gp[2], phi)) <= 1e-11 * scale
    # m(p, q) = int p q through monomial integrals
    c = [[0, 0], [1, 0], [0, 1]]
    exact = sum(gp[i] * gq[j] * green_integral(cell.coords, c[i][0] + c[j][0], c[i][1] + c[j][1])
                for i in range(3) for j in range(3))
    assert p @ ops.mass @ q == pytest.approx(exact, rel=1e-11, abs=1e-12 * cell.area)


def test_local_matrix_structure():
    rng = np.random.default_rng(4)
    for _ in range(100):
        cell = make_cell(random_polygon(rng))
        ops = build_element_operators(cell)
        K, M = ops.stiffness, ops.mass
        assert np.allclose(K, K.T, atol=1e-12) and np.allclose(M, M.T, atol=1e-14)
        ev = np.linalg.eigvalsh(K)
        assert ev[0] > -1e-10 and ev[1] > 1e-10
        assert np.allclose(K @ np.ones(cell.n_vertices), 0, atol=1e-10)
        assert np.linalg.eigvalsh(M)[0] > 0


def test_stability_corridor(mesh_zoo):
    """Rayleigh quotients of the discrete forms against their consistency parts stay bounded."""
    for mesh in mesh_zoo.values():
        for cell in mesh.cells():
            ops = build_element_operators(cell)
            D, P = ops.dof_matrix, ops.energy_projector
            G = ops.gram
            Gt = np.zeros((3, 3))
            Gt[1:, 1:] = cell.area / cell.diameter ** 2 * np.eye(2)
            # a^K(Pi phi, Pi phi) on non-constant projected parts
            Kc = P.T @ Gt @ P
            K = ops.stiffness
            w, V = np.linalg.eigh(Kc)
            rng_space = V[:, w > 1e-12 * w.max()]
            r = np.linalg.eigvals(np.linalg.solve(rng_space.T @ Kc @ rng_space, rng_space.T @ K @ rng_space)).real
            assert 0.01 <= r.min() and r.max() <= 100
            rm = np.linalg.eigvalsh(ops.mass) / (cell.area / cell.n_vertices)
            assert 0.01 <= rm.min() and rm.max() <= 100


def test_scaling():
    small = make_cell([[0, 0], [1, 0], [1.2, 0.8], [0.3, 1.1]])
    big = make_cell(2 * small.coords)
    a, b = build_element_operators(small), build_element_operators(big)
    assert np.allclose(a.stiffness, b.stiffness, atol=1e-13)
    assert np.allclose(4 * a.mass, b.mass, atol=1e-13)


def test_stabilization_blocks():
    ops = build_element_operators(UNIT)
    R = np.eye(4) - ops.projector_dofs
    assert np.allclose(ops.stab_stiffness, R.T @ R)
    assert np.allclose(ops.stab_mass, 2.0 * ops.stab_stiffness)
    assert np.allclose(build_local_stiffness(UNIT, ops.energy_projector), ops.stiffness)
    assert np.allclose(build_local_mass(UNIT, ops.l2_projector), ops.mass)


def test_basis_integrals_sum_to_area():
    rng = np.random.default_rng(1)
    cell = make_cell(random_polygon(rng))
    ops = build_element_operators(cell)
    assert ops.basis_integrals.sum() == pytest.approx(cell.area)


KIN2 = IonicKinetics(a=0.16875, b=1.0, lam=-100.0, theta=0.25)


def test_ionic_form_zero_and_root_states():
    ops = build_element_operators(UNIT)
    z = np.zeros(4)
    assert np.allclose(local_ionic_form(UNIT, ops, z, z, KIN2), 0)
    assert np.allclose(local_ionic_form(UNIT, ops, np.ones(4), z, KIN2), 0, atol=1e-14)
    assert np.allclose(local_gating_form(UNIT, ops, z, z, KIN2), 0)


def test_ionic_form_constant_half():
    rng = np.random.default_rng(9)
    cell = make_cell(random_polygon(rng))
    ops = build_element_operators(cell)
    n = cell.n_vertices
    b = local_ionic_form(cell, ops, np.full(n, 0.5), np.zeros(n), KIN2)
    # integrals of the projected hat functions, computed through integrate_polynomial
    weights = np.array([integrate_polynomial(cell, lambda x, y, c=ops.energy_projector[:, i]:
                                             c[0] + c[1] * (x - cell.centroid[0]) / cell.diameter
                                             + c[2] * (y - cell.centroid[1]) / cell.diameter)
                        for i in range(n)])
    assert np.allclose(b, -6.25 * weights, atol=1e-12)


def test_gating_form_constants():
    kin = KINETICS_PRESETS["example1"]
    ops = build_element_operators(UNIT)
    w0 = ops.basis_integrals
    one, z = np.ones(4), np.zeros(4)
    assert np.allclose(local_gating_form(UNIT, ops, one, z, kin), 0.2232 * w0)
    assert np.allclose(local_gating_form(UNIT, ops, z, one, kin), -0.9 * w0)


def test_ionic_form_linear_state_exact():
    """Cubic-in-v integrand of degree 4 against Green's-theorem integrals."""
    cell = make_cell([[0, 0], [1, 0], [1.3, 0.9], [0.4, 1.2], [-0.2, 0.5]])
    ops = build_element_operators(cell)
    v = cell.coords[:, 0]
    w = cell.coords[:, 1]
    b = local_ionic_form(cell, ops, v, w, KIN2)
    lam, th = KIN2.lam, KIN2.theta
    # I_ion(x, y) = -lam (y - x (1 - x)(x - th)) expanded in monomials
    poly = {(0, 1): -lam, (1, 0): -lam * th, (2, 0): lam * (1 + th), (3, 0): -lam}
    mono = [(0, 0), (1, 0), (0, 1)]
    xc, yc = cell.centroid
    h = cell.diameter
    # moments against 1, (x - xc)/h, (y - yc)/h
    mom = np.zeros(3)
    for (p, q), c in poly.items():
        mom[0] += c * green_integral(cell.coords, p, q)
        mom[1] += c * (green_integral(cell.coords, p + 1, q) - xc * green_integral(cell.coords, p, q)) / h
        mom[2] += c * (green_integral(cell.coords, p, q + 1) - yc * green_integral(cell.coords, p, q)) / h
    assert np.allclose(b, ops.l2_projector.T @ mom, rtol=1e-11, atol=1e-11)
    del mono


def test_unsupported_kinetics():
    ops = build_element_operators(UNIT)
    with pytest.raises(UnsupportedKineticsError):
        local_ionic_form(UNIT, ops, np.zeros(4), np.zeros(4), object())


def test_square_mesh_cells_identical():
    m = generate_square_mesh(3)
    ref = build_element_operators(m.cell(0)).stiffness
    for k in range(m.n_cells):
        assert np.allclose(build_element_operators(m.cell(k)).stiffness, ref, atol=1e-13)
