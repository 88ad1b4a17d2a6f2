"""Global degrees of freedom, sparse operators and nonlinear form vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from . import kernels
from .mesh import PolygonalMesh
from .vem_local import ElementOperators, ScaledMonomialBasis, _dof_matrices, triangle_rule

__all__ = [
    "DofMap",
    "FieldState",
    "MeshOperators",
    "build_mesh_operators",
    "assemble_global",
    "nonlocal_functional",
    "assemble_ionic",
    "assemble_gating",
    "assemble_reaction",
    "assemble_applied_current",
    "interpolate",
    "evaluate_at_points",
    "l2_projection_error",
]


@dataclass(frozen=True)
class DofMap:
    """One DoF per mesh vertex; ``cell_dofs`` follows the cell vertex order."""

    n_dofs: int
    cell_ptr: np.ndarray
    cell_dofs: np.ndarray

    @classmethod
    def from_mesh(cls, mesh: PolygonalMesh) -> "DofMap":
        return cls(mesh.n_vertices, mesh.cell_ptr, mesh.cell_vertices)

    def local(self, k: int) -> np.ndarray:
        return self.cell_dofs[self.cell_ptr[k]:self.cell_ptr[k + 1]]


@dataclass
class FieldState:
    v: np.ndarray
    w: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        if self.v.shape != self.w.shape or self.v.ndim != 1:
            raise ValueError("v and w must be 1-d vectors of equal length")
        if not (np.isfinite(self.v).all() and np.isfinite(self.w).all()):
            raise ValueError("field state contains non-finite values")

    def copy(self) -> "FieldState":
        return FieldState(self.v.copy(), self.w.copy(), self.t)


@dataclass(frozen=True)
class MeshOperators:
    """Element operators for every cell of a mesh, in packed arrays.

    ``proj`` row ``p`` holds the monomial coefficients of the projected hat
    function attached to flat local DoF ``p``; local matrices are stored
    row-major at offsets ``mat_ptr``.  The fan quadrature (exact to degree
    5) is stored per cell at offsets ``quad_ptr``.
    """

    mesh: PolygonalMesh
    dofmap: DofMap
    proj: np.ndarray
    stiffness: np.ndarray
    mass: np.ndarray
    mat_ptr: np.ndarray
    quad_ptr: np.ndarray
    quad_points: np.ndarray
    quad_mono: np.ndarray
    quad_w: np.ndarray
    cell_gram: np.ndarray
    basis_weights: np.ndarray
    backend: str

    @property
    def n_dofs(self) -> int:
        return self.dofmap.n_dofs

    def local_stiffness(self, k: int) -> np.ndarray:
        n = self.mesh.cell_ptr[k + 1] - self.mesh.cell_ptr[k]
        return self.stiffness[self.mat_ptr[k]:self.mat_ptr[k + 1]].reshape(n, n)

    def local_mass(self, k: int) -> np.ndarray:
        n = self.mesh.cell_ptr[k + 1] - self.mesh.cell_ptr[k]
        return self.mass[self.mat_ptr[k]:self.mat_ptr[k + 1]].reshape(n, n)

    def projector(self, k: int) -> np.ndarray:
        s, e = self.mesh.cell_ptr[k], self.mesh.cell_ptr[k + 1]
        return self.proj[s:e].T

    def element(self, k: int) -> ElementOperators:
        """Dense per-cell view, e.g. for the local form routines."""
        cell = self.mesh.cell(k)
        basis = ScaledMonomialBasis(cell.centroid, cell.diameter)
        D, _ = _dof_matrices(cell.coords, cell.centroid, cell.diameter)
        P = self.projector(k)
        R = np.eye(cell.n_vertices) - D @ P
        return ElementOperators(basis, D, P, P.copy(), self.cell_gram[k].copy(),
                                self.local_stiffness(k).copy(), self.local_mass(k).copy(),
                                R.T @ R, cell.diameter ** 2 * (R.T @ R))

    def cell_coefficients(self, dofs) -> np.ndarray:
        """Monomial coefficients of the projection of ``dofs`` on every cell."""
        dofs = np.asarray(dofs, dtype=float)
        return np.add.reduceat(self.proj * dofs[self.mesh.cell_vertices][:, None],
                               self.mesh.cell_ptr[:-1], axis=0)


def _fan_quadrature_all(mesh: PolygonalMesh, order: int = 3):
    ref_pts, ref_w = triangle_rule(order)
    flat = mesh.cell_vertices
    nxt = mesh.next_flat
    cell_of = mesh.flat_cell
    c = mesh.centroids[cell_of]
    a = mesh.vertices[flat] - c
    b = mesh.vertices[flat[nxt]] - c
    det = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    pts = (c[:, None, :] + ref_pts[None, :, 0:1] * a[:, None, :]
           + ref_pts[None, :, 1:2] * b[:, None, :]).reshape(-1, 2)
    wts = (det[:, None] * ref_w[None, :]).ravel()
    m = len(ref_w)
    quad_ptr = mesh.cell_ptr * m
    cell_q = np.repeat(cell_of, m)
    xi = (pts - mesh.centroids[cell_q]) / mesh.diameters[cell_q][:, None]
    mono = np.column_stack([np.ones(len(pts)), xi])
    return quad_ptr, pts, mono, wts


def build_mesh_operators(mesh: PolygonalMesh, backend: str | None = None) -> MeshOperators:
    """Element operators for all cells; built once and reused every step."""
    proj, stiff, mass, mat_ptr = kernels.element_matrices(
        mesh.vertices, mesh.cell_ptr, mesh.cell_vertices, mesh.centroids, mesh.diameters,
        backend=backend)
    quad_ptr, pts, mono, wts = _fan_quadrature_all(mesh)
    gram = np.add.reduceat(mono[:, :, None] * mono[:, None, :] * wts[:, None, None],
                           quad_ptr[:-1], axis=0)
    # integral of the projected hat function of each flat local DoF
    cell_of = mesh.flat_cell
    local_int = np.einsum("pa,pa->p", proj, gram[cell_of, 0, :])
    weights = np.bincount(mesh.cell_vertices, weights=local_int, minlength=mesh.n_vertices)
    ops = MeshOperators(mesh, DofMap.from_mesh(mesh), proj, stiff, mass, mat_ptr, quad_ptr, pts,
                        mono, wts, gram, weights, backend or kernels.BACKEND)
    for arr in (proj, stiff, mass, mat_ptr, quad_ptr, pts, mono, wts, gram, weights):
        arr.flags.writeable = False
    return ops


def _scatter_pattern(mesh, mat_ptr):
    sizes = np.diff(mesh.cell_ptr)
    cell_e = np.repeat(np.arange(mesh.n_cells), sizes * sizes)
    off = np.arange(int(mat_ptr[-1])) - mat_ptr[cell_e]
    n_e = sizes[cell_e]
    base = mesh.cell_ptr[cell_e]
    rows = mesh.cell_vertices[base + off // n_e]
    cols = mesh.cell_vertices[base + off % n_e]
    return rows, cols


def assemble_global(mesh: PolygonalMesh, ops: MeshOperators):
    """Global stiffness ``A`` and mass ``M`` as CSR matrices."""
    if ops.mesh is not mesh and ops.n_dofs != mesh.n_vertices:
        raise ValueError("element operators do not match the mesh")
    rows, cols = _scatter_pattern(mesh, ops.mat_ptr)
    n = mesh.n_vertices
    A = sp.coo_matrix((ops.stiffness, (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((ops.mass, (rows, cols)), shape=(n, n)).tocsr()
    A.sort_indices()
    M.sort_indices()
    return A, M


def nonlocal_functional(v, mesh: PolygonalMesh, ops: MeshOperators) -> float:
    """Domain integral of the cellwise L2 projection of ``v``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (ops.n_dofs,):
        raise ValueError("v has the wrong length")
    return float(ops.basis_weights @ v)


def _check_model(model):
    from .vem_local import _check_kinetics

    return _check_kinetics(model)


def assemble_reaction(state: FieldState, mesh: PolygonalMesh, ops: MeshOperators, model):
    """Ionic and gating vectors ``(b, c)`` in one pass over the cells."""
    kin = _check_model(model)
    return kernels.reaction_forms(mesh.cell_ptr, mesh.cell_vertices, ops.proj, ops.quad_ptr,
                                  ops.quad_mono, ops.quad_w, state.v, state.w, kin, ops.n_dofs,
                                  backend=ops.backend)


def assemble_ionic(state: FieldState, mesh: PolygonalMesh, ops: MeshOperators, model) -> np.ndarray:
    return assemble_reaction(state, mesh, ops, model)[0]


def assemble_gating(state: FieldState, mesh: PolygonalMesh, ops: MeshOperators, model) -> np.ndarray:
    return assemble_reaction(state, mesh, ops, model)[1]


def _project_moments(ops: MeshOperators, values_at_quad):
    """Right-hand side of the cellwise L2 projection of quadrature-point data,
    tested against the projected hat functions."""
    mesh = ops.mesh
    moments = np.add.reduceat(ops.quad_mono * (ops.quad_w * values_at_quad)[:, None],
                              ops.quad_ptr[:-1], axis=0)
    local = np.einsum("pa,pa->p", ops.proj, moments[mesh.flat_cell])
    return np.bincount(mesh.cell_vertices, weights=local, minlength=ops.n_dofs)


def assemble_applied_current(t: float, mesh: PolygonalMesh, ops: MeshOperators, model) -> np.ndarray:
    """``(Pi0 I_app(t), phi_i)`` for every basis function.

    The cellwise projection is computed with the fan quadrature, so a
    discontinuous stimulus is sampled at quadrature points only.
    """
    if hasattr(model, "has_current") and not model.has_current(t):
        return np.zeros(ops.n_dofs)
    f = model.applied_current if hasattr(model, "applied_current") else model
    vals = np.asarray(f(ops.quad_points[:, 0], ops.quad_points[:, 1], t), dtype=float)
    return _project_moments(ops, np.broadcast_to(vals, ops.quad_w.shape))


def interpolate(mesh: PolygonalMesh, f) -> np.ndarray:
    """Vertex values of ``f(x, y)``."""
    return np.asarray(f(mesh.vertices[:, 0], mesh.vertices[:, 1]), dtype=float) \
        + np.zeros(mesh.n_vertices)


def _point_in_polygon(pt, poly, tol):
    """Point inside or on the boundary of a CCW polygon (crossing number)."""
    x, y = pt
    q = np.roll(poly, -1, axis=0)
    e = q - poly
    cross = e[:, 0] * (y - poly[:, 1]) - e[:, 1] * (x - poly[:, 0])
    seg_len = np.hypot(e[:, 0], e[:, 1])
    # on an edge: collinear and within the segment's bounding box
    proj = ((x - poly[:, 0]) * e[:, 0] + (y - poly[:, 1]) * e[:, 1]) / seg_len ** 2
    if np.any((np.abs(cross) <= tol * seg_len) & (proj >= -tol) & (proj <= 1 + tol)):
        return True
    inside = False
    for (x1, y1), (x2, y2) in zip(poly, q):
        if (y1 > y) != (y2 > y):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xint:
                inside = not inside
    return inside


def evaluate_at_points(mesh: PolygonalMesh, ops: MeshOperators, dofs, points, tol=1e-10):
    """Evaluate a discrete field at arbitrary points of the domain.

    Points that coincide with mesh vertices return the DoF value; other
    points are located in a cell and use its projected linear polynomial.
    """
    dofs = np.asarray(dofs, dtype=float)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    scale = max(mesh.domain.width, mesh.domain.height)
    out = np.empty(len(points))
    vtree = cKDTree(mesh.vertices)
    dist, idx = vtree.query(points)
    hit = dist <= tol * scale
    out[hit] = dofs[idx[hit]]
    miss = np.flatnonzero(~hit)
    if len(miss):
        coef = ops.cell_coefficients(dofs)
        ctree = cKDTree(mesh.centroids)
        kq = min(16, mesh.n_cells)
        _, cand = ctree.query(points[miss], k=kq)
        cand = np.atleast_2d(cand).reshape(len(miss), kq)
        for row, i in enumerate(miss):
            p = points[i]
            found = None
            for k in cand[row]:
                if _point_in_polygon(p, mesh.vertices[mesh.cell_vertex_ids(k)], tol * scale):
                    found = k
                    break
            if found is None:
                for k in range(mesh.n_cells):
                    if _point_in_polygon(p, mesh.vertices[mesh.cell_vertex_ids(k)], tol * scale):
                        found = k
                        break
            if found is None:
                raise ValueError(f"point {p} lies outside the mesh")
            xi = (p - mesh.centroids[found]) / mesh.diameters[found]
            out[i] = coef[found, 0] + coef[found, 1] * xi[0] + coef[found, 2] * xi[1]
    return out


def l2_projection_error(mesh: PolygonalMesh, ops: MeshOperators, f) -> float:
    """``||Pi0 f - f||`` in L2 with the cellwise L2 projection onto linears."""
    vals = np.asarray(f(ops.quad_points[:, 0], ops.quad_points[:, 1]), dtype=float)
    moments = np.add.reduceat(ops.quad_mono * (ops.quad_w * vals)[:, None],
                              ops.quad_ptr[:-1], axis=0)
    coef = np.linalg.solve(ops.cell_gram, moments[:, :, None])[:, :, 0]
    cell_q = np.repeat(np.arange(mesh.n_cells), np.diff(ops.quad_ptr))
    proj_vals = np.einsum("qa,qa->q", ops.quad_mono, coef[cell_q])
    return float(np.sqrt(np.dot(ops.quad_w, (vals - proj_vals) ** 2)))
