"""Lowest-order (k = 1) virtual element operators on a single polygon.

Local degrees of freedom are the vertex values.  Polynomials are expanded in
the scaled monomial basis ``{1, (x - xc)/h, (y - yc)/h}`` centred at the
area centroid.  Projector matrices are stored as ``(3, n)`` coefficient
maps from DoF vectors to monomial coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import DegenerateCellError, UnsupportedKineticsError
from .mesh import Cell

__all__ = [
    "ScaledMonomialBasis",
    "ElementOperators",
    "triangle_rule",
    "fan_quadrature",
    "integrate_polynomial",
    "build_energy_projector",
    "build_l2_projector",
    "build_local_stiffness",
    "build_local_mass",
    "build_element_operators",
    "local_ionic_form",
    "local_gating_form",
]

DEGREE = 1


@dataclass(frozen=True)
class ScaledMonomialBasis:
    centroid: np.ndarray
    diameter: float
    degree: int = DEGREE

    def __post_init__(self):
        if self.degree != 1:
            raise NotImplementedError("only the lowest-order space (k = 1) is implemented")

    @property
    def size(self) -> int:
        return (self.degree + 1) * (self.degree + 2) // 2

    def __call__(self, pts) -> np.ndarray:
        """Monomial values at points, shape ``(npts, 3)``."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        xi = (pts - self.centroid) / self.diameter
        return np.column_stack([np.ones(len(pts)), xi[:, 0], xi[:, 1]])

    def gradients(self) -> np.ndarray:
        """Constant gradients of the three monomials, shape ``(3, 2)``."""
        g = np.zeros((3, 2))
        g[1, 0] = g[2, 1] = 1.0 / self.diameter
        return g


@lru_cache(maxsize=8)
def triangle_rule(order: int = 3):
    """Collapsed Gauss rule on the reference triangle (0,0), (1,0), (0,1).

    Exact for polynomials of total degree ``2 * order - 1``; the default is
    exact up to degree 5.  Returns ``(points (m, 2), weights (m,))`` with
    weights summing to 1/2.
    """
    xj, wj = roots_jacobi(order, 1.0, 0.0)
    xl, wl = roots_legendre(order)
    u = 0.5 * (1.0 + xj)
    wu = 0.25 * wj
    s = 0.5 * (1.0 + xl)
    ws = 0.5 * wl
    U, S = np.meshgrid(u, s, indexing="ij")
    pts = np.column_stack([U.ravel(), ((1.0 - U) * S).ravel()])
    w = np.outer(wu, ws).ravel()
    pts.flags.writeable = False
    w.flags.writeable = False
    return pts, w


def fan_quadrature(coords, centroid, order: int = 3):
    """Quadrature points and weights from a fan triangulation about the centroid.

    Triangle weights carry the signed area, so the rule remains exact on
    any simple polygon whose fan triangles overlap.
    """
    coords = np.asarray(coords, dtype=float)
    ref_pts, ref_w = triangle_rule(order)
    a = coords - centroid
    b = np.roll(coords, -1, axis=0) - centroid
    det = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    pts = (centroid[None, None, :]
           + ref_pts[None, :, 0:1] * a[:, None, :]
           + ref_pts[None, :, 1:2] * b[:, None, :])
    w = det[:, None] * ref_w[None, :]
    return pts.reshape(-1, 2), w.ravel()


def _monomial_callable(poly):
    if callable(poly):
        return poly
    if isinstance(poly, dict):
        terms = [(int(p), int(q), float(c)) for (p, q), c in poly.items()]
        if any(p + q > 4 for p, q, _ in terms):
            raise ValueError("polynomial degree exceeds 4")
        return lambda x, y: sum(c * x ** p * y ** q for p, q, c in terms) + 0.0 * x
    raise TypeError("polynomial must be a callable f(x, y) or a {(p, q): coeff} dict")


def integrate_polynomial(cell: Cell, poly) -> float:
    """Integrate a polynomial of degree <= 4 (exactly, up to round-off) over a cell.

    ``poly`` is either a vectorised callable ``f(x, y)`` or a dict mapping
    exponent pairs ``(p, q)`` to coefficients.
    """
    f = _monomial_callable(poly)
    pts, w = fan_quadrature(cell.coords, cell.centroid)
    return float(np.dot(w, f(pts[:, 0], pts[:, 1])))


def _dof_matrices(coords, centroid, diameter):
    """Monomial evaluation matrix D (n, 3) and right-hand side B (3, n)."""
    n = len(coords)
    xi = (coords - centroid) / diameter
    D = np.column_stack([np.ones(n), xi])
    prv = np.roll(coords, 1, axis=0)
    nxt = np.roll(coords, -1, axis=0)
    B = np.empty((3, n))
    B[0] = 1.0 / n
    # boundary integral of grad(m) . n times the hat trace, edge by edge
    B[1] = 0.5 * (nxt[:, 1] - prv[:, 1]) / diameter
    B[2] = 0.5 * (prv[:, 0] - nxt[:, 0]) / diameter
    return D, B


def _monomial_gram(coords, centroid, diameter):
    """Exact L2 Gram matrix of the scaled monomials (vertex moment formulas)."""
    p = (coords - centroid) / diameter
    q = np.roll(p, -1, axis=0)
    cross = p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]
    h2 = diameter * diameter
    area = 0.5 * cross.sum()
    mx = cross.dot(p[:, 0] + q[:, 0]) / 6.0
    my = cross.dot(p[:, 1] + q[:, 1]) / 6.0
    mxx = cross.dot(p[:, 0] ** 2 + p[:, 0] * q[:, 0] + q[:, 0] ** 2) / 12.0
    myy = cross.dot(p[:, 1] ** 2 + p[:, 1] * q[:, 1] + q[:, 1] ** 2) / 12.0
    mxy = cross.dot(p[:, 0] * q[:, 1] + 2 * p[:, 0] * p[:, 1] + 2 * q[:, 0] * q[:, 1]
                    + q[:, 0] * p[:, 1]) / 24.0
    return h2 * np.array([[area, mx, my], [mx, mxx, mxy], [my, mxy, myy]])


def _cell_parts(cell: Cell):
    return np.asarray(cell.coords, dtype=float), np.asarray(cell.centroid, dtype=float), float(cell.diameter)


def build_energy_projector(cell: Cell) -> np.ndarray:
    """Coefficient matrix (3, n) of the H1 projector onto linear polynomials.

    The gradient part is fixed by boundary integrals of the vertex hat
    traces; the constant is fixed by the vertex average.
    """
    coords, c, h = _cell_parts(cell)
    D, B = _dof_matrices(coords, c, h)
    G = B @ D
    if not np.isfinite(G).all() or abs(np.linalg.det(G)) < 1e-14:
        raise DegenerateCellError("singular projector Gram matrix")
    return np.linalg.solve(G, B)


def build_l2_projector(cell: Cell, energy_projector: np.ndarray) -> np.ndarray:
    # On the enhanced k = 1 space the L2 and H1 projections agree.
    return np.array(energy_projector, copy=True)


def build_local_stiffness(cell: Cell, energy_projector: np.ndarray) -> np.ndarray:
    coords, c, h = _cell_parts(cell)
    D, B = _dof_matrices(coords, c, h)
    G = B @ D
    G[0] = 0.0
    P = energy_projector
    Pi = D @ P
    R = np.eye(len(coords)) - Pi
    return P.T @ G @ P + R.T @ R


def build_local_mass(cell: Cell, l2_projector: np.ndarray) -> np.ndarray:
    coords, c, h = _cell_parts(cell)
    D, _ = _dof_matrices(coords, c, h)
    H = _monomial_gram(coords, c, h)
    P = l2_projector
    R = np.eye(len(coords)) - D @ P
    return P.T @ H @ P + h * h * (R.T @ R)


@dataclass(frozen=True)
class ElementOperators:
    """Dense per-cell matrices, all computed once per cell.

    ``dof_matrix`` evaluates the monomials at the vertices (rows = DoFs);
    ``energy_projector`` and ``l2_projector`` map DoF vectors to monomial
    coefficients; ``stab_stiffness`` and ``stab_mass`` are the vertex-value
    stabilizations applied to the non-polynomial remainder.
    """

    basis: ScaledMonomialBasis
    dof_matrix: np.ndarray
    energy_projector: np.ndarray
    l2_projector: np.ndarray
    gram: np.ndarray
    stiffness: np.ndarray
    mass: np.ndarray
    stab_stiffness: np.ndarray
    stab_mass: np.ndarray

    @property
    def projector_dofs(self) -> np.ndarray:
        """The projector as an (n, n) map on vertex values."""
        return self.dof_matrix @ self.energy_projector

    @property
    def basis_integrals(self) -> np.ndarray:
        """Integrals of the projected hat functions over the cell."""
        return self.gram[0] @ self.l2_projector


def build_element_operators(cell: Cell) -> ElementOperators:
    coords, c, h = _cell_parts(cell)
    basis = ScaledMonomialBasis(c, h)
    D, _ = _dof_matrices(coords, c, h)
    P = build_energy_projector(cell)
    P0 = build_l2_projector(cell, P)
    R = np.eye(len(coords)) - D @ P
    S = R.T @ R
    return ElementOperators(
        basis=basis,
        dof_matrix=D,
        energy_projector=P,
        l2_projector=P0,
        gram=_monomial_gram(coords, c, h),
        stiffness=build_local_stiffness(cell, P),
        mass=build_local_mass(cell, P0),
        stab_stiffness=S,
        stab_mass=h * h * S,
    )


def _check_kinetics(model):
    from .model import FitzHughNagumo, IonicKinetics

    if isinstance(model, FitzHughNagumo):
        return model.kinetics
    if isinstance(model, IonicKinetics):
        return model
    raise UnsupportedKineticsError(
        f"exact quadrature needs polynomial FitzHugh-Nagumo kinetics, got {type(model).__name__}")


def _projected_at_quadrature(cell, ops, v_dofs, w_dofs):
    pts, wq = fan_quadrature(cell.coords, cell.centroid)
    mono = ops.basis(pts)
    vq = mono @ (ops.l2_projector @ np.asarray(v_dofs, dtype=float))
    wq_vals = mono @ (ops.l2_projector @ np.asarray(w_dofs, dtype=float))
    return mono, wq, vq, wq_vals


def local_ionic_form(cell: Cell, ops: ElementOperators, v_dofs, w_dofs, model) -> np.ndarray:
    """Values of the projected ionic form against each local basis function."""
    kin = _check_kinetics(model)
    mono, wq, vq, wv = _projected_at_quadrature(cell, ops, v_dofs, w_dofs)
    moments = mono.T @ (wq * kin.ionic(vq, wv))
    return ops.l2_projector.T @ moments


def local_gating_form(cell: Cell, ops: ElementOperators, v_dofs, w_dofs, model) -> np.ndarray:
    """Values of the projected gating form against each local basis function."""
    kin = _check_kinetics(model)
    mono, wq, vq, wv = _projected_at_quadrature(cell, ops, v_dofs, w_dofs)
    moments = mono.T @ (wq * kin.gating(vq, wv))
    return ops.l2_projector.T @ moments
