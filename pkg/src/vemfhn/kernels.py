"""Backend selection for the hot kernels.

The compiled extension ``vemfhn._ckernels`` is used when it imports;
otherwise (or when ``VEMFHN_BACKEND=python`` is set) the numpy versions in
``vemfhn._pykernels`` are used.  Both expose the same functions.
"""
import os

import numpy as np

from . import _pykernels

_requested = os.environ.get("VEMFHN_BACKEND", "auto").lower()
_compiled = None
if _requested != "python":
    try:
        from . import _ckernels as _compiled
    except ImportError:
        if _requested == "cython":
            raise
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
BACKENDS = {"python": _pykernels}
if _compiled is not None:
    BACKENDS["cython"] = _compiled


def get_backend(name=None):
    """Kernel module by name (``None`` selects the active backend)."""
    return BACKENDS[name or BACKEND]


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def element_matrices(vertices, cell_ptr, cell_vertices, centroids, diameters, backend=None):
    return get_backend(backend).element_matrices(
        _f64(vertices), _i64(cell_ptr), _i64(cell_vertices), _f64(centroids), _f64(diameters))


def reaction_forms(cell_ptr, cell_vertices, proj, quad_ptr, quad_mono, quad_w, v, w,
                   kinetics, n_dofs, backend=None):
    k = kinetics
    return get_backend(backend).reaction_forms(
        _i64(cell_ptr), _i64(cell_vertices), _f64(proj), _i64(quad_ptr), _f64(quad_mono),
        _f64(quad_w), _f64(v), _f64(w), float(k.lam), float(k.theta), float(k.a), float(k.b),
        int(n_dofs))
