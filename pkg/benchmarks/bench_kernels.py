"""Time the compiled and numpy kernel backends on the same meshes.

Run with ``python benchmarks/bench_kernels.py [--repeat R] [--sizes 32,64,128]``.
Prints one row per (kernel, mesh) with the best time of each backend, the
speed-up, and the largest difference between their outputs.
"""
import argparse
import timeit

import numpy as np

from vemfhn import kernels
from vemfhn.assembly import build_mesh_operators
from vemfhn.mesh import generate_square_mesh, generate_voronoi_mesh
from vemfhn.model import KINETICS_PRESETS


def _element_call(mesh, backend):
    return lambda: kernels.element_matrices(mesh.vertices, mesh.cell_ptr, mesh.cell_vertices,
                                            mesh.centroids, mesh.diameters, backend=backend)


def _reaction_call(mesh, ops, v, w, backend):
    kin = KINETICS_PRESETS["example3"]
    return lambda: kernels.reaction_forms(mesh.cell_ptr, mesh.cell_vertices, ops.proj,
                                          ops.quad_ptr, ops.quad_mono, ops.quad_w, v, w, kin,
                                          mesh.n_vertices, backend=backend)


def _max_diff(a, b):
    if isinstance(a, tuple):
        return max(_max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, float) - np.asarray(b, float))))


def bench(meshes, repeat=5):
    rows = []
    names = sorted(kernels.BACKENDS)
    for label, mesh in meshes:
        ops = build_mesh_operators(mesh, "python")
        rng = np.random.default_rng(0)
        v = rng.uniform(-0.2, 1.2, mesh.n_vertices)
        w = rng.uniform(0.0, 0.5, mesh.n_vertices)
        for kernel in ("element_matrices", "reaction_forms"):
            calls = {b: _element_call(mesh, b) if kernel == "element_matrices"
                     else _reaction_call(mesh, ops, v, w, b) for b in names}
            times = {b: min(timeit.repeat(calls[b], number=1, repeat=repeat)) for b in names}
            diff = _max_diff(*(calls[b]() for b in names)) if len(names) > 1 else 0.0
            rows.append((kernel, label, mesh.n_cells, times, diff))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", default="32,64,128", help="square mesh counts; voronoi uses n*n seeds")
    args = ap.parse_args(argv)
    meshes = []
    for n in (int(s) for s in args.sizes.split(",")):
        meshes.append((f"squares {n}", generate_square_mesh(n)))
        meshes.append((f"voronoi {n * n}", generate_voronoi_mesh(n * n, seed=0)))
    if "cython" not in kernels.BACKENDS:
        print("compiled extension not available; timing the numpy backend only")
    names = sorted(kernels.BACKENDS)
    head = f"{'kernel':<17} {'mesh':<14} {'cells':>6} " + " ".join(f"{b + ' [ms]':>12}" for b in names)
    print(head + ("   speed-up   max |diff|" if len(names) > 1 else ""))
    for kernel, label, nc, times, diff in bench(meshes, args.repeat):
        line = f"{kernel:<17} {label:<14} {nc:>6} " + " ".join(f"{1e3 * times[b]:>12.2f}" for b in names)
        if len(names) > 1:
            line += f"   {times['python'] / times['cython']:>8.1f}x   {diff:.2e}"
        print(line)


if __name__ == "__main__":
    main()
