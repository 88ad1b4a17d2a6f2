"""Pure numpy implementations of the hot kernels.

These define the reference behaviour; ``_ckernels.pyx`` implements the same
signatures in Cython.  See ``vemfhn.kernels`` for backend selection.
"""
import numpy as np

from .vem_local import _dof_matrices, _monomial_gram


def element_matrices(vertices, cell_ptr, cell_vertices, centroids, diameters):
    """Projectors, stiffness and mass matrices for every cell.

    Returns ``proj`` with shape ``(n_flat, 3)`` (row ``p`` holds the monomial
    coefficients of the projected hat function of flat local DoF ``p``),
    the packed row-major local stiffness and mass matrices, and the offsets
    ``mat_ptr`` into the packed arrays.
    """
    n_cells = len(cell_ptr) - 1
    sizes = np.diff(cell_ptr)
    mat_ptr = np.zeros(n_cells + 1, dtype=np.int64)
    np.cumsum(sizes * sizes, out=mat_ptr[1:])
    proj = np.empty((int(cell_ptr[-1]), 3))
    stiff = np.empty(int(mat_ptr[-1]))
    mass = np.empty(int(mat_ptr[-1]))
    for k in range(n_cells):
        s, e = cell_ptr[k], cell_ptr[k + 1]
        coords = vertices[cell_vertices[s:e]]
        c, h = centroids[k], diameters[k]
        D, B = _dof_matrices(coords, c, h)
        G = B @ D
        P = np.linalg.solve(G, B)
        R = np.eye(e - s) - D @ P
        S = R.T @ R
        G[0] = 0.0
        H = _monomial_gram(coords, c, h)
        proj[s:e] = P.T
        stiff[mat_ptr[k]:mat_ptr[k + 1]] = (P.T @ G @ P + S).ravel()
        mass[mat_ptr[k]:mat_ptr[k + 1]] = (P.T @ H @ P + h * h * S).ravel()
    return proj, stiff, mass, mat_ptr


def reaction_forms(cell_ptr, cell_vertices, proj, quad_ptr, quad_mono, quad_w,
                   v, w, lam, theta, a, b, n_dofs):
    """Assembled ionic and gating vectors for FitzHugh-Nagumo kinetics."""
    n_cells = len(cell_ptr) - 1
    cell_of_flat = np.repeat(np.arange(n_cells), np.diff(cell_ptr))
    cell_of_q = np.repeat(np.arange(n_cells), np.diff(quad_ptr))
    starts = cell_ptr[:-1]
    cv = np.add.reduceat(proj * v[cell_vertices][:, None], starts, axis=0)
    cw = np.add.reduceat(proj * w[cell_vertices][:, None], starts, axis=0)
    vq = np.einsum("qa,qa->q", quad_mono, cv[cell_of_q])
    wq = np.einsum("qa,qa->q", quad_mono, cw[cell_of_q])
    ion = -lam * (wq - vq * (1.0 - vq) * (vq - theta))
    gat = a * vq - b * wq
    qs = quad_ptr[:-1]
    mi = np.add.reduceat(quad_mono * (quad_w * ion)[:, None], qs, axis=0)
    mg = np.add.reduceat(quad_mono * (quad_w * gat)[:, None], qs, axis=0)
    bi = np.einsum("pa,pa->p", proj, mi[cell_of_flat])
    bg = np.einsum("pa,pa->p", proj, mg[cell_of_flat])
    return (np.bincount(cell_vertices, weights=bi, minlength=n_dofs),
            np.bincount(cell_vertices, weights=bg, minlength=n_dofs))
