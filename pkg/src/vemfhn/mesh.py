"""Polygonal meshes of axis-aligned rectangles.

Cells are stored in a compressed layout (``cell_ptr`` / ``cell_vertices``)
with vertices listed counter-clockwise.  Every mesh is validated on
construction and is immutable afterwards.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import Voronoi, cKDTree

from .errors import InvalidDomainError, MeshError

__all__ = [
    "Rectangle",
    "UNIT_SQUARE",
    "Vertex",
    "Cell",
    "PolygonalMesh",
    "MeshQualityReport",
    "generate_square_mesh",
    "generate_distorted_quad_mesh",
    "generate_voronoi_mesh",
    "check_mesh_assumptions",
    "save_mesh",
    "load_mesh",
]


@dataclass(frozen=True)
class Rectangle:
    x0: float = 0.0
    y0: float = 0.0
    x1: float = 1.0
    y1: float = 1.0

    def __post_init__(self):
        vals = (self.x0, self.y0, self.x1, self.y1)
        if not all(np.isfinite(vals)):
            raise InvalidDomainError(f"non-finite rectangle bounds {vals}")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise InvalidDomainError(f"degenerate rectangle {vals}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    def on_boundary(self, pts, tol=1e-12):
        pts = np.atleast_2d(pts)
        scale = max(self.width, self.height)
        t = tol * scale
        return (
            (np.abs(pts[:, 0] - self.x0) <= t)
            | (np.abs(pts[:, 0] - self.x1) <= t)
            | (np.abs(pts[:, 1] - self.y0) <= t)
            | (np.abs(pts[:, 1] - self.y1) <= t)
        )


UNIT_SQUARE = Rectangle()


class Vertex(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Cell:
    """Geometry of a single polygon, vertices counter-clockwise."""

    vertex_ids: np.ndarray
    coords: np.ndarray
    area: float
    centroid: np.ndarray
    diameter: float

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_ids)

    @property
    def edge_vectors(self) -> np.ndarray:
        return np.roll(self.coords, -1, axis=0) - self.coords

    @property
    def edge_lengths(self) -> np.ndarray:
        return np.hypot(*self.edge_vectors.T)

    @property
    def normals(self) -> np.ndarray:
        """Outward unit normals, one per edge (edge i joins vertex i to i+1)."""
        e = self.edge_vectors
        n = np.column_stack([e[:, 1], -e[:, 0]])
        return n / np.hypot(*n.T)[:, None]


def _local_next(cell_ptr: np.ndarray) -> np.ndarray:
    """Flat index of the next vertex within the same cell."""
    n_flat = int(cell_ptr[-1])
    nxt = np.arange(1, n_flat + 1)
    nxt[cell_ptr[1:] - 1] = cell_ptr[:-1]
    return nxt


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    return False


class PolygonalMesh:
    """Conforming polygonal mesh of a rectangle.

    Parameters
    ----------
    vertices : (N, 2) array
    cells : sequence of vertex-index sequences, each counter-clockwise
    domain : Rectangle
    validate : bool
        Check every structural invariant (default). Loaders and generators
        always validate.
    """

    def __init__(self, vertices, cells: Sequence[Sequence[int]], domain: Rectangle = UNIT_SQUARE,
                 validate: bool = True):
        verts = np.array(vertices, dtype=float).reshape(-1, 2)
        if len(cells) == 0:
            raise MeshError("mesh has no cells")
        sizes = np.array([len(c) for c in cells], dtype=np.int64)
        ptr = np.zeros(len(cells) + 1, dtype=np.int64)
        np.cumsum(sizes, out=ptr[1:])
        flat = np.fromiter((int(i) for c in cells for i in c), dtype=np.int64, count=int(ptr[-1]))

        self.domain = domain
        self.vertices = verts
        self.cell_ptr = ptr
        self.cell_vertices = flat
        self._compute_geometry()
        self._build_edges()
        if validate:
            self.validate()
        for arr in (self.vertices, self.cell_ptr, self.cell_vertices, self.areas, self.centroids,
                    self.diameters, self.edges, self.edge_cells, self.local_edge, self.local_orient):
            arr.flags.writeable = False

    # -- construction helpers -------------------------------------------------
    def _compute_geometry(self):
        ptr, flat, verts = self.cell_ptr, self.cell_vertices, self.vertices
        if np.any(np.diff(ptr) < 3):
            raise MeshError("every cell needs at least 3 vertices")
        if flat.min() < 0 or flat.max() >= len(verts):
            raise MeshError("cell references a vertex index out of range")
        if not np.all(np.isfinite(verts)):
            raise MeshError("non-finite vertex coordinates")
        nxt = _local_next(ptr)
        self.next_flat = nxt
        cell_of = np.repeat(np.arange(self.n_cells), np.diff(ptr))
        self.flat_cell = cell_of
        p = verts[flat]
        q = verts[flat[nxt]]
        cross = p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]
        area2 = np.bincount(cell_of, weights=cross, minlength=self.n_cells)
        self.areas = 0.5 * area2
        with np.errstate(divide="ignore", invalid="ignore"):
            cx = np.bincount(cell_of, weights=(p[:, 0] + q[:, 0]) * cross, minlength=self.n_cells)
            cy = np.bincount(cell_of, weights=(p[:, 1] + q[:, 1]) * cross, minlength=self.n_cells)
            self.centroids = np.column_stack([cx, cy]) / (3.0 * area2)[:, None]

        # pairwise diameters through a padded (cells, nmax) layout
        sizes = np.diff(ptr)
        nmax = int(sizes.max())
        pad = np.full((self.n_cells, nmax, 2), np.nan)
        local = np.arange(len(flat)) - ptr[cell_of]
        pad[cell_of, local] = p
        diam = np.zeros(self.n_cells)
        for j in range(nmax):
            d = np.hypot(pad[:, :, 0] - pad[:, j:j + 1, 0], pad[:, :, 1] - pad[:, j:j + 1, 1])
            diam = np.fmax(diam, np.nanmax(np.where(np.isnan(d), -np.inf, d), axis=1))
        self.diameters = diam

    def _build_edges(self):
        flat, nxt = self.cell_vertices, self.next_flat
        a, b = flat, flat[nxt]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        keys = np.column_stack([lo, hi])
        edges, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        inv = inv.ravel()
        if np.any(counts > 2):
            raise MeshError("an edge is shared by more than two cells")
        if np.any(lo == hi):
            raise MeshError("zero-length edge (repeated vertex in a cell)")
        edge_cells = np.full((len(edges), 2), -1, dtype=np.int64)
        orient = np.where(a == lo, 1, -1).astype(np.int8)
        # first occurrence fills slot 0, second fills slot 1
        order = np.argsort(inv, kind="stable")
        inv_sorted = inv[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = inv_sorted[1:] != inv_sorted[:-1]
        edge_cells[inv_sorted[first], 0] = self.flat_cell[order[first]]
        edge_cells[inv_sorted[~first], 1] = self.flat_cell[order[~first]]
        self.edges = edges.astype(np.int64)
        self.edge_cells = edge_cells
        self.local_edge = inv.astype(np.int64)
        self.local_orient = orient
        self._edge_counts = counts

    # -- public API -----------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cell_ptr) - 1

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_cells[:, 1] < 0)

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_cells[:, 1] >= 0)

    def vertex(self, i: int) -> Vertex:
        return Vertex(float(self.vertices[i, 0]), float(self.vertices[i, 1]))

    def cell_vertex_ids(self, k: int) -> np.ndarray:
        return self.cell_vertices[self.cell_ptr[k]:self.cell_ptr[k + 1]]

    def cell(self, k: int) -> Cell:
        ids = self.cell_vertex_ids(k)
        return Cell(ids, self.vertices[ids], float(self.areas[k]), self.centroids[k].copy(),
                    float(self.diameters[k]))

    def cells(self):
        return [self.cell(k) for k in range(self.n_cells)]

    @property
    def cell_sizes(self) -> np.ndarray:
        return np.diff(self.cell_ptr)

    def signature(self) -> str:
        """Short content hash, stable across runs and platforms."""
        import hashlib

        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.cell_ptr, dtype="<i8").tobytes())
        h.update(np.ascontiguousarray(self.cell_vertices, dtype="<i8").tobytes())
        return h.hexdigest()[:16]

    def validate(self):
        dom = self.domain
        verts = self.vertices
        if np.any(self.areas <= 0):
            k = int(np.argmin(self.areas))
            raise MeshError(f"cell {k} has non-positive signed area {self.areas[k]:.3e} "
                            "(vertices must be counter-clockwise)")
        tol = 1e-10 * max(dom.width, dom.height)
        if (verts[:, 0].min() < dom.x0 - tol or verts[:, 0].max() > dom.x1 + tol
                or verts[:, 1].min() < dom.y0 - tol or verts[:, 1].max() > dom.y1 + tol):
            raise MeshError("vertices outside the domain rectangle")
        used = np.zeros(self.n_vertices, dtype=bool)
        used[self.cell_vertices] = True
        if not used.all():
            raise MeshError(f"{int((~used).sum())} vertices are not used by any cell")
        for k in range(self.n_cells):
            ids = self.cell_vertex_ids(k)
            if len(np.unique(ids)) != len(ids):
                raise MeshError(f"cell {k} repeats a vertex")
            self._check_simple(k, verts[ids])
        # interior edges: opposite orientation in the two cells
        both = self.edge_cells[:, 1] >= 0
        s = np.zeros(self.n_edges, dtype=np.int64)
        np.add.at(s, self.local_edge, self.local_orient.astype(np.int64))
        if np.any(s[both] != 0):
            raise MeshError("interior edge traversed with the same orientation by both cells")
        bnd = self.edges[~both]
        mid = 0.5 * (verts[bnd[:, 0]] + verts[bnd[:, 1]])
        on = dom.on_boundary(mid, tol=1e-9) & dom.on_boundary(verts[bnd[:, 0]], tol=1e-9) \
            & dom.on_boundary(verts[bnd[:, 1]], tol=1e-9)
        if not on.all():
            raise MeshError(f"{int((~on).sum())} edges used by one cell lie inside the domain "
                            "(non-conforming mesh or hole)")
        total = self.areas.sum()
        if abs(total - dom.area) > 1e-10 * dom.area:
            raise MeshError(f"cell areas sum to {total!r}, domain area is {dom.area!r}")
        if self.n_vertices - self.n_edges + self.n_cells != 1:
            raise MeshError("Euler characteristic V - E + F != 1")

    @staticmethod
    def _check_simple(k, pts):
        n = len(pts)
        if n <= 3:
            return
        for i in range(n):
            p1, p2 = pts[i], pts[(i + 1) % n]
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                if _segments_intersect(p1, p2, pts[j], pts[(j + 1) % n]):
                    raise MeshError(f"cell {k} is self-intersecting")

    def __repr__(self):
        return (f"PolygonalMesh(n_vertices={self.n_vertices}, n_cells={self.n_cells}, "
                f"h={self.h:.4g})")


# -- generators ---------------------------------------------------------------

def _grid_vertices(n, domain):
    xs = np.linspace(domain.x0, domain.x1, n + 1)
    ys = np.linspace(domain.y0, domain.y1, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    return np.column_stack([X.ravel(), Y.ravel()])


def _grid_cells(n):
    cells = []
    for j in range(n):
        for i in range(n):
            v0 = j * (n + 1) + i
            cells.append((v0, v0 + 1, v0 + n + 2, v0 + n + 1))
    return cells


def generate_square_mesh(n: int, domain: Rectangle = UNIT_SQUARE) -> PolygonalMesh:
    """Structured ``n x n`` grid of congruent rectangles."""
    if not isinstance(domain, Rectangle):
        raise InvalidDomainError("domain must be a Rectangle")
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    return PolygonalMesh(_grid_vertices(n, domain), _grid_cells(n), domain)


def generate_distorted_quad_mesh(n: int, amplitude: float = 0.2, seed: int = 0,
                                 domain: Rectangle = UNIT_SQUARE) -> PolygonalMesh:
    """Grid with interior vertices moved randomly by at most ``amplitude / n``.

    Displacements are scaled by the cell width in each direction.  A tangled
    result is retried with half the amplitude, at most five times.
    """
    if not 0.0 <= amplitude < 0.3:
        raise ValueError(f"amplitude must lie in [0, 0.3), got {amplitude}")
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    base = _grid_vertices(n, domain)
    cells = _grid_cells(n)
    interior = ~domain.on_boundary(base, tol=1e-12)
    amp = amplitude
    for _ in range(5):
        rng = np.random.default_rng(seed)
        radius = amp * np.sqrt(rng.random(len(base)))
        angle = 2.0 * np.pi * rng.random(len(base))
        disp = np.column_stack([radius * np.cos(angle) * domain.width / n,
                                radius * np.sin(angle) * domain.height / n])
        verts = base + np.where(interior[:, None], disp, 0.0)
        try:
            return PolygonalMesh(verts, cells, domain)
        except MeshError:
            amp *= 0.5
    raise MeshError("could not generate an untangled distorted mesh after 5 attempts")


def _mirror(points, domain):
    x, y = points[:, 0], points[:, 1]
    return np.vstack([
        points,
        np.column_stack([2 * domain.x0 - x, y]),
        np.column_stack([2 * domain.x1 - x, y]),
        np.column_stack([x, 2 * domain.y0 - y]),
        np.column_stack([x, 2 * domain.y1 - y]),
    ])


def _clipped_voronoi(seeds, domain):
    """Voronoi cells of ``seeds`` clipped to the rectangle via mirror points."""
    vor = Voronoi(_mirror(seeds, domain))
    polys = []
    for i in range(len(seeds)):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or len(region) < 3:
            raise MeshError("unbounded Voronoi region for an interior seed")
        pts = vor.vertices[region]
        ang = np.arctan2(pts[:, 1] - seeds[i, 1], pts[:, 0] - seeds[i, 0])
        order = np.argsort(ang, kind="stable")
        polys.append((np.asarray(region)[order], pts[order]))
    return vor, polys


def _polygon_centroid(pts):
    q = pts[np.r_[1:len(pts), 0]]
    cross = pts[:, 0] * q[:, 1] - q[:, 0] * pts[:, 1]
    a2 = cross.sum()
    return np.array([((pts[:, 0] + q[:, 0]) * cross).sum(), ((pts[:, 1] + q[:, 1]) * cross).sum()]) / (3 * a2)


def _snap_to_boundary(pts, domain, tol):
    pts = pts.copy()
    for col, lo, hi in ((0, domain.x0, domain.x1), (1, domain.y0, domain.y1)):
        pts[np.abs(pts[:, col] - lo) <= tol, col] = lo
        pts[np.abs(pts[:, col] - hi) <= tol, col] = hi
    return pts


def _assemble_from_polygons(polys, domain, merge_tol):
    """Merge numerically coincident vertices and build cell index lists."""
    all_pts = np.vstack([p for _, p in polys])
    all_pts = _snap_to_boundary(all_pts, domain, merge_tol)
    tree = cKDTree(all_pts)
    parent = np.arange(len(all_pts))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in sorted(tree.query_pairs(merge_tol)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(len(all_pts))])
    uniq, new_index = np.unique(roots, return_inverse=True)
    verts = all_pts[uniq]
    cells = []
    offset = 0
    for _, p in polys:
        ids = new_index[offset:offset + len(p)]
        offset += len(p)
        out = []
        for v in ids:
            if not out or out[-1] != v:
                out.append(int(v))
        if len(out) > 1 and out[0] == out[-1]:
            out.pop()
        cells.append(out)
    return verts, cells


def _collapse_short_edges(verts, cells, domain, ratio):
    """Collapse edges shorter than ``ratio`` times the smaller adjacent diameter."""
    verts = np.array(verts, dtype=float)
    cells = [list(c) for c in cells]
    tol = 1e-12 * max(domain.width, domain.height)
    vert_cells = {}
    for k, c in enumerate(cells):
        for v in c:
            vert_cells.setdefault(v, set()).add(k)

    def diameter(c):
        p = verts[c]
        return np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1)).max()

    def corner(p):
        return (abs(p[0] - domain.x0) <= tol or abs(p[0] - domain.x1) <= tol) and \
               (abs(p[1] - domain.y0) <= tol or abs(p[1] - domain.y1) <= tol)

    def on_bnd(p):
        return bool(domain.on_boundary(p[None, :], tol=1e-12)[0])

    def sides(p):
        return {i for i, (c, lim) in enumerate(((p[0], domain.x0), (p[0], domain.x1),
                                                (p[1], domain.y0), (p[1], domain.y1)))
                if abs(c - lim) <= tol}

    def ccw_area(c, pts):
        p = pts[c]
        q = np.roll(p, -1, axis=0)
        return (p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]).sum()

    diam = [diameter(c) for c in cells]
    rejected = set()
    while True:
        owners = {}
        for k, c in enumerate(cells):
            for i in range(len(c)):
                a, b = c[i], c[(i + 1) % len(c)]
                owners.setdefault((min(a, b), max(a, b)), []).append(k)
        cand = []
        for key, ks in owners.items():
            if key in rejected:
                continue
            ref = min(diam[k] for k in ks)
            length = float(np.hypot(*(verts[key[0]] - verts[key[1]])))
            if length < ratio * ref:
                cand.append((length / ref, key))
        if not cand:
            break
        cand.sort()
        touched = set()
        for _, (a, b) in cand:
            # an earlier collapse in this pass may have removed either end
            if a not in vert_cells or b not in vert_cells:
                continue
            affected = vert_cells[a] | vert_cells[b]
            if affected & touched:
                continue
            pa, pb = verts[a], verts[b]
            ca, cb = corner(pa), corner(pb)
            ba, bb = on_bnd(pa), on_bnd(pb)
            if (ca and cb) or (ba and bb and not sides(pa) & sides(pb)):
                rejected.add((a, b))
                continue
            if ca or (ba and not bb):
                target = pa.copy()
            elif cb or (bb and not ba):
                target = pb.copy()
            else:
                target = 0.5 * (pa + pb)
            trial = verts.copy()
            trial[a] = target
            new = {}
            ok = True
            for k in affected:
                out = []
                for v in cells[k]:
                    v = a if v == b else v
                    if not out or out[-1] != v:
                        out.append(v)
                if len(out) > 1 and out[0] == out[-1]:
                    out.pop()
                if len(out) < 3 or ccw_area(out, trial) <= 0:
                    ok = False
                    break
                new[k] = out
            if not ok:
                rejected.add((a, b))
                continue
            verts[a] = target
            for k, out in new.items():
                cells[k] = out
                vert_cells[a].add(k)
                diam[k] = diameter(out)
            del vert_cells[b]
            touched |= affected
    used = sorted({v for c in cells for v in c})
    remap = {v: i for i, v in enumerate(used)}
    return verts[used], [[remap[v] for v in c] for c in cells]


def generate_voronoi_mesh(n_seeds: int, lloyd_iterations: int = 20, seed: int = 0,
                          domain: Rectangle = UNIT_SQUARE, seeds=None,
                          min_edge_ratio: float = 0.1) -> PolygonalMesh:
    """Lloyd-relaxed Voronoi tessellation clipped to ``domain``.

    Parameters
    ----------
    n_seeds : int
        Number of generating points (ignored when ``seeds`` is given).
    lloyd_iterations : int
        Number of centroidal relaxation sweeps.
    seed : int
        RNG seed for the initial random seeds.
    seeds : (n, 2) array, optional
        Explicit generating points.
    min_edge_ratio : float
        Edges shorter than this fraction of the adjacent cell diameter are
        collapsed after relaxation; 0 disables the cleanup.
    """
    rng = np.random.default_rng(seed)
    if seeds is None:
        if n_seeds < 4:
            raise ValueError("need at least 4 seeds")
        pts = np.column_stack([domain.x0 + domain.width * rng.random(n_seeds),
                               domain.y0 + domain.height * rng.random(n_seeds)])
    else:
        pts = np.array(seeds, dtype=float).reshape(-1, 2)
        if len(pts) < 4:
            raise ValueError("need at least 4 seeds")
    scale = max(domain.width, domain.height)
    for attempt in range(6):
        d, _ = cKDTree(pts).query(pts, k=2)
        if d[:, 1].min() > 1e-10 * scale:
            break
        if attempt == 5:
            raise MeshError("duplicate Voronoi seeds could not be separated")
        dup = d[:, 1] <= 1e-10 * scale
        pts[dup] += 1e-6 * scale * (rng.random((int(dup.sum()), 2)) - 0.5)
        pts[:, 0] = np.clip(pts[:, 0], domain.x0, domain.x1)
        pts[:, 1] = np.clip(pts[:, 1], domain.y0, domain.y1)
    # seeds on the boundary would coincide with their mirror images
    inset = 1e-9 * scale
    pts[:, 0] = np.clip(pts[:, 0], domain.x0 + inset, domain.x1 - inset)
    pts[:, 1] = np.clip(pts[:, 1], domain.y0 + inset, domain.y1 - inset)

    for _ in range(int(lloyd_iterations)):
        _, polys = _clipped_voronoi(pts, domain)
        pts = np.array([_polygon_centroid(p) for _, p in polys])
    _, polys = _clipped_voronoi(pts, domain)
    h_est = scale / np.sqrt(len(pts))
    verts, cells = _assemble_from_polygons(polys, domain, merge_tol=1e-9 * h_est)
    if min_edge_ratio > 0:
        verts, cells = _collapse_short_edges(verts, cells, domain, min_edge_ratio)
    return PolygonalMesh(verts, cells, domain)


# -- quality report -----------------------------------------------------------

@dataclass(frozen=True)
class MeshQualityReport:
    """Per-cell regularity measures.

    ``edge_ratios`` is shortest edge over diameter; ``star_ratios`` is the
    radius of the largest disc inside the polygon's kernel over diameter,
    so the cell is star-shaped with respect to every point of a disc of
    radius ``star_ratios * h_K``.
    """

    edge_ratios: np.ndarray
    star_ratios: np.ndarray
    star_centers: np.ndarray
    C_T: float

    @property
    def min_edge_ratio(self) -> float:
        return float(self.edge_ratios.min())

    @property
    def min_star_ratio(self) -> float:
        return float(self.star_ratios.min())

    @property
    def star_shaped(self) -> np.ndarray:
        return self.star_ratios >= self.C_T

    @property
    def passed(self) -> bool:
        return bool(np.all(self.edge_ratios > self.C_T) and np.all(self.star_shaped))


def _kernel_chebyshev(pts):
    """Largest disc inside the kernel of a CCW polygon (linear program)."""
    e = np.roll(pts, -1, axis=0) - pts
    nrm = np.column_stack([e[:, 1], -e[:, 0]])
    nrm /= np.hypot(*nrm.T)[:, None]
    A = np.column_stack([nrm, np.ones(len(pts))])
    b = np.einsum("ij,ij->i", nrm, pts)
    res = linprog(c=[0.0, 0.0, -1.0], A_ub=A, b_ub=b,
                  bounds=[(None, None), (None, None), (0.0, None)], method="highs")
    if res.status != 0:
        return np.array([np.nan, np.nan]), 0.0
    return res.x[:2], max(float(res.x[2]), 0.0)


def check_mesh_assumptions(mesh: PolygonalMesh, C_T: float = 0.05) -> MeshQualityReport:
    """Evaluate the shortest-edge and star-shapedness regularity conditions."""
    ratios = np.empty(mesh.n_cells)
    star = np.empty(mesh.n_cells)
    centers = np.empty((mesh.n_cells, 2))
    for k in range(mesh.n_cells):
        c = mesh.cell(k)
        ratios[k] = c.edge_lengths.min() / c.diameter
        centers[k], r = _kernel_chebyshev(c.coords)
        star[k] = r / c.diameter
    return MeshQualityReport(ratios, star, centers, float(C_T))


# -- file format --------------------------------------------------------------

def save_mesh(mesh: PolygonalMesh, path) -> None:
    """Write the plain-text ``POLYMESH 1`` format (round-trips exactly)."""
    d = mesh.domain
    lines = ["POLYMESH 1", f"DOMAIN {d.x0!r} {d.y0!r} {d.x1!r} {d.y1!r}", str(mesh.n_vertices)]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(str(mesh.n_cells))
    for k in range(mesh.n_cells):
        ids = mesh.cell_vertex_ids(k)
        lines.append(" ".join([str(len(ids))] + [str(int(i)) for i in ids]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path, domain: Rectangle | None = None) -> PolygonalMesh:
    """Read a ``POLYMESH 1`` file and validate every invariant.

    The ``DOMAIN`` line is optional; without it (and without ``domain``) the
    bounding box of the vertices is used.
    """
    with open(path) as fh:
        tokens = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not tokens or tokens[0].split() != ["POLYMESH", "1"]:
        raise MeshError(f"{path}: missing 'POLYMESH 1' header")
    pos = 1
    if tokens[pos].startswith("DOMAIN"):
        vals = [float(t) for t in tokens[pos].split()[1:]]
        if domain is None:
            domain = Rectangle(*vals)
        pos += 1
    try:
        nv = int(tokens[pos])
        verts = np.array([[float(t) for t in tokens[pos + 1 + i].split()] for i in range(nv)])
        pos += 1 + nv
        nc = int(tokens[pos])
        cells = []
        for i in range(nc):
            parts = [int(t) for t in tokens[pos + 1 + i].split()]
            if parts[0] != len(parts) - 1:
                raise MeshError(f"{path}: cell {i} declares {parts[0]} vertices, lists {len(parts) - 1}")
            cells.append(parts[1:])
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"{path}: malformed mesh file ({exc})") from exc
    if verts.shape != (nv, 2):
        raise MeshError(f"{path}: vertex lines must hold two coordinates")
    if domain is None:
        domain = Rectangle(verts[:, 0].min(), verts[:, 1].min(), verts[:, 0].max(), verts[:, 1].max())
    return PolygonalMesh(verts, cells, domain)
