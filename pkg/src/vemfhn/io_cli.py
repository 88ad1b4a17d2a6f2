"""Configuration files, output writers and the command-line interface.

Config files are INI-style ``key = value`` sections::

    [experiment]
    preset = example2

    [mesh]
    family = squares
    n = 64

Every key is validated; unknown keys are errors.  Output files are
deterministic functions of their inputs.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from . import __version__
from .assembly import FieldState
from .errors import ConfigError, VemError
from .experiments import (EXAMPLE2_TIMES, EXAMPLE3_TIMES, ErrorReport, run_example1,
                          spatial_std)
from .kernels import BACKENDS
from .mesh import (PolygonalMesh, generate_distorted_quad_mesh, generate_square_mesh,
                   generate_voronoi_mesh, load_mesh, save_mesh)
from .model import (KINETICS_PRESETS, DiffusionLaw, FitzHughNagumo, IonicKinetics, Stimulus,
                    initial_data)
from .timestepper import (Discretization, LinearSolverConfig, PicardConfig, TimeGrid,
                          Trajectory, initial_state, run)

__all__ = [
    "PRESETS",
    "RunConfig",
    "SnapshotFile",
    "parse_config",
    "config_from_mapping",
    "write_vtk_snapshot",
    "read_vtk_snapshot",
    "write_error_csv",
    "write_manifest",
    "read_manifest",
    "config_from_manifest",
    "SnapshotWriter",
    "run_job",
    "main",
]

# -- schema -------------------------------------------------------------------


def _float_list(text: str):
    text = text.strip()
    if not text:
        return ()
    return tuple(float(t) for t in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _positive(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _finite(x):
    return math.isfinite(x)


def _choice(*options):
    def check(x):
        return x in options
    check.options = options
    return check


# key -> (parser, validator, description of the valid range)
SCHEMA: dict[str, tuple[Callable, Callable | None, str]] = {
    "experiment.preset": (str, _choice("example1", "example2", "example3"), "example1|example2|example3"),
    "experiment.backend": (str, _choice("auto", *BACKENDS), "auto|" + "|".join(BACKENDS)),
    "mesh.family": (str, _choice("squares", "distorted", "voronoi", "file"),
                    "squares|distorted|voronoi|file"),
    "mesh.n": (int, _positive, "> 0"),
    "mesh.seed": (int, _nonneg, ">= 0"),
    "mesh.amplitude": (float, lambda x: 0 <= x < 0.3, "[0, 0.3)"),
    "mesh.lloyd_iterations": (int, _nonneg, ">= 0"),
    "mesh.path": (str, None, "path"),
    "kinetics.a": (float, _finite, "finite"),
    "kinetics.b": (float, _finite, "finite"),
    "kinetics.lambda": (float, _finite, "finite"),
    "kinetics.theta": (float, _finite, "finite"),
    "diffusion.kind": (str, _choice("linear", "constant"), "linear|constant"),
    "diffusion.slope": (float, _finite, "finite"),
    "diffusion.floor": (float, _positive, "> 0"),
    "diffusion.value": (float, _positive, "> 0"),
    "stimulus.enabled": (_bool, None, "boolean"),
    "stimulus.amplitude": (float, _finite, "finite"),
    "stimulus.x0": (float, _finite, "finite"),
    "stimulus.y0": (float, _finite, "finite"),
    "stimulus.radius": (float, _nonneg, ">= 0"),
    "stimulus.t_on": (float, _finite, "finite"),
    "stimulus.t_off": (float, lambda x: not math.isnan(x), "number or inf"),
    "initial.preset": (str, _choice("example1", "example2", "example3", "constant"),
                       "example1|example2|example3|constant"),
    "initial.v": (float, _finite, "finite"),
    "initial.w": (float, _finite, "finite"),
    "time.T": (float, lambda x: x > 0 and math.isfinite(x), "> 0"),
    "time.N": (int, _positive, ">= 1"),
    "picard.tol": (float, _positive, "> 0"),
    "picard.max_iters": (int, _positive, ">= 1"),
    "picard.damping": (float, lambda x: 0 < x <= 1, "(0, 1]"),
    "picard.shift": (str, _choice("lumped", "none"), "lumped|none"),
    "linsolve.tol": (float, _positive, "> 0"),
    "linsolve.max_iters": (int, _positive, ">= 1"),
    "output.stride": (int, _nonneg, ">= 0"),
    "output.times": (_float_list, lambda xs: all(math.isfinite(t) and t >= 0 for t in xs),
                     "list of non-negative times"),
    "output.dir": (str, None, "path"),
    "output.vtk": (_bool, None, "boolean"),
}


def _kinetics_defaults(name):
    k = KINETICS_PRESETS[name]
    return {"kinetics.a": k.a, "kinetics.b": k.b, "kinetics.lambda": k.lam, "kinetics.theta": k.theta}


_COMMON = {
    "experiment.backend": "auto",
    "mesh.seed": 0,
    "mesh.amplitude": 0.2,
    "mesh.lloyd_iterations": 20,
    "mesh.path": "",
    "diffusion.kind": "linear",
    "diffusion.slope": 0.01,
    "diffusion.floor": 1e-4,
    "diffusion.value": 0.01,
    "stimulus.amplitude": 1.0,
    "stimulus.x0": 0.5,
    "stimulus.y0": 0.5,
    "stimulus.radius": 0.2,
    "stimulus.t_on": 4.0,
    "stimulus.t_off": math.inf,
    "initial.v": 0.0,
    "initial.w": 0.0,
    "picard.tol": 1e-8,
    "picard.max_iters": 50,
    "picard.damping": 1.0,
    "picard.shift": "lumped",
    "linsolve.tol": 1e-10,
    "linsolve.max_iters": 2000,
    "output.stride": 0,
    "output.dir": "output",
    "output.vtk": True,
}

PRESETS: dict[str, dict[str, Any]] = {
    "example1": {**_COMMON, **_kinetics_defaults("example1"),
                 "experiment.preset": "example1", "mesh.family": "distorted", "mesh.n": 32,
                 "stimulus.enabled": False, "initial.preset": "example1",
                 "time.T": 1.0, "time.N": 80, "output.times": ()},
    "example2": {**_COMMON, **_kinetics_defaults("example2"),
                 "experiment.preset": "example2", "mesh.family": "squares", "mesh.n": 128,
                 "stimulus.enabled": True, "initial.preset": "example2",
                 "time.T": 5.0, "time.N": 500, "output.times": EXAMPLE2_TIMES},
    "example3": {**_COMMON, **_kinetics_defaults("example3"),
                 "experiment.preset": "example3", "mesh.family": "voronoi", "mesh.n": 32,
                 "stimulus.enabled": False, "initial.preset": "example3",
                 "time.T": 15.0, "time.N": 1500, "output.times": EXAMPLE3_TIMES},
}


def _format_value(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, tuple):
        return ", ".join(repr(float(t)) for t in x)
    return str(x)


def _parse_value(key: str, raw):
    if key not in SCHEMA:
        raise ConfigError(key, "unknown configuration key")
    parser, check, valid = SCHEMA[key]
    if isinstance(raw, str):
        try:
            val = parser(raw.strip())
        except (TypeError, ValueError):
            raise ConfigError(key, f"cannot parse {raw!r} as {getattr(parser, '__name__', 'value')}") from None
    else:
        val = raw
        if parser is int and not (isinstance(raw, (int, np.integer)) and not isinstance(raw, bool)):
            raise ConfigError(key, f"expected an integer, got {raw!r}")
        if parser is float:
            val = float(raw)
        if parser is _float_list:
            val = tuple(float(t) for t in raw)
    if check is not None and not check(val):
        raise ConfigError(key, f"value {val!r} out of range (expected {valid})")
    return val


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for one run, keyed ``section.name``."""

    values: Mapping[str, Any]

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def preset(self) -> str:
        return self.values["experiment.preset"]

    def items(self):
        return sorted(self.values.items())

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        vals = dict(self.values)
        for k, raw in overrides.items():
            vals[k] = _parse_value(k, raw)
        return _checked(vals)

    def build_mesh(self) -> PolygonalMesh:
        v = self.values
        fam = v["mesh.family"]
        if fam == "file":
            if not v["mesh.path"]:
                raise ConfigError("mesh.path", "required when mesh.family = file")
            return load_mesh(v["mesh.path"])
        n = v["mesh.n"]
        if fam == "squares":
            return generate_square_mesh(n)
        if fam == "distorted":
            return generate_distorted_quad_mesh(n, v["mesh.amplitude"], v["mesh.seed"])
        return generate_voronoi_mesh(n * n, v["mesh.lloyd_iterations"], v["mesh.seed"])

    def build_model(self) -> FitzHughNagumo:
        v = self.values
        kin = IonicKinetics(v["kinetics.a"], v["kinetics.b"], v["kinetics.lambda"], v["kinetics.theta"])
        diff = DiffusionLaw(v["diffusion.kind"], v["diffusion.slope"], v["diffusion.floor"],
                            v["diffusion.value"])
        stim = None
        if v["stimulus.enabled"]:
            stim = Stimulus(v["stimulus.amplitude"], v["stimulus.x0"], v["stimulus.y0"],
                            v["stimulus.radius"], v["stimulus.t_on"], v["stimulus.t_off"])
        init = initial_data(v["initial.preset"], v["initial.v"], v["initial.w"])
        return FitzHughNagumo(kin, diff, stim, init)

    def time_grid(self) -> TimeGrid:
        return TimeGrid(self.values["time.T"], self.values["time.N"])

    def picard(self) -> PicardConfig:
        v = self.values
        return PicardConfig(v["picard.tol"], v["picard.max_iters"], v["picard.damping"], v["picard.shift"])

    def linsolve(self) -> LinearSolverConfig:
        return LinearSolverConfig(self.values["linsolve.tol"], self.values["linsolve.max_iters"])

    @property
    def backend(self) -> str | None:
        b = self.values["experiment.backend"]
        return None if b == "auto" else b


def _checked(vals: dict) -> RunConfig:
    if vals["stimulus.t_off"] <= vals["stimulus.t_on"]:
        raise ConfigError("stimulus.t_off", "must be later than stimulus.t_on")
    return RunConfig(vals)


def config_from_mapping(values: Mapping[str, Any] | None = None, preset: str | None = None) -> RunConfig:
    """Defaults of ``preset`` (or of ``experiment.preset`` in ``values``) updated by ``values``."""
    values = dict(values or {})
    name = preset or values.get("experiment.preset", "example1")
    name = _parse_value("experiment.preset", name)
    vals = dict(PRESETS[name])
    for k, raw in values.items():
        vals[k] = _parse_value(k, raw)
    vals["experiment.preset"] = name
    return _checked(vals)


def parse_config(path, preset: str | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Read, default-fill and validate a config file.

    ``preset`` wins over ``experiment.preset`` in the file; ``overrides``
    (e.g. from command-line flags) win over both.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None, empty_lines_in_values=False,
                                   inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError("config", f"{path}: {exc}") from None
    values = {}
    for section in cp.sections():
        for name, raw in cp.items(section):
            values[f"{section}.{name}"] = raw
    if preset is not None:
        values["experiment.preset"] = preset
    values.update(overrides or {})
    return config_from_mapping(values)


# -- writers --------------------------------------------------------------------


@dataclass(frozen=True)
class SnapshotFile:
    path: Path
    time: float
    fields: tuple = ("v", "w")


def _fmt_array(a) -> str:
    return "\n".join("%.17g" % x for x in np.asarray(a, dtype=float).ravel())


def write_vtk_snapshot(mesh: PolygonalMesh, state: FieldState, path, time: float | None = None) -> SnapshotFile:
    """Legacy ASCII unstructured grid with polygon cells and point scalars ``v`` and ``w``."""
    v = np.asarray(state.v, dtype=float)
    w = np.asarray(state.w, dtype=float)
    if len(v) != mesh.n_vertices or len(w) != mesh.n_vertices:
        raise ValueError("state size does not match the mesh")
    t = float(state.t if time is None else time)
    nv, nc = mesh.n_vertices, mesh.n_cells
    out = ["# vtk DataFile Version 3.0", f"vemfhn snapshot t={t!r}", "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {nv} double"]
    out += ["%.17g %.17g 0" % (x, y) for x, y in mesh.vertices]
    sizes = np.diff(mesh.cell_ptr)
    out.append(f"CELLS {nc} {int(np.sum(sizes + 1))}")
    cv = mesh.cell_vertices
    for k in range(nc):
        ids = cv[mesh.cell_ptr[k]:mesh.cell_ptr[k + 1]]
        out.append(" ".join([str(len(ids))] + [str(int(i)) for i in ids]))
    out.append(f"CELL_TYPES {nc}")
    out += ["7"] * nc
    out.append(f"POINT_DATA {nv}")
    for name, vals in (("v", v), ("w", w)):
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default", _fmt_array(vals)]
    path = Path(path)
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(out) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK snapshot {path}: {exc}") from exc
    return SnapshotFile(path, t)


def read_vtk_snapshot(path):
    """Parse a file written by :func:`write_vtk_snapshot`.

    Returns ``(points (n, 2), cells list, {"v": array, "w": array})``.
    """
    with open(path) as fh:
        lines = fh.read().split("\n")
    i = lines.index(next(ln for ln in lines if ln.startswith("POINTS")))
    nv = int(lines[i].split()[1])
    pts = np.array([[float(t) for t in ln.split()[:2]] for ln in lines[i + 1:i + 1 + nv]])
    i += 1 + nv
    nc = int(lines[i].split()[1])
    cells = [[int(t) for t in ln.split()[1:]] for ln in lines[i + 1:i + 1 + nc]]
    fields = {}
    for j, ln in enumerate(lines):
        if ln.startswith("SCALARS"):
            name = ln.split()[1]
            fields[name] = np.array([float(t) for t in lines[j + 2:j + 2 + nv]])
    return pts, cells, fields


def _g15(x) -> str:
    return f"{float(x):.15g}"


def _dt_label(dt: float) -> str:
    inv = 1.0 / dt
    if abs(inv - round(inv)) < 1e-9 * inv:
        return f"dt_1_{int(round(inv))}"
    return "dt_" + _g15(dt).replace(".", "p")


def _grid_from(report):
    """``(hs, dts, {"v": table, "w": table or None})`` from a report or ``{(h, dt): E}``."""
    if isinstance(report, ErrorReport):
        return list(report.hs), list(report.dts), {"v": report.E_v, "w": report.E_w}
    hs = sorted({k[0] for k in report}, reverse=True)
    dts = sorted({k[1] for k in report}, reverse=True)
    tab = np.full((len(hs), len(dts)), np.nan)
    for (h, dt), val in report.items():
        tab[hs.index(h), dts.index(dt)] = val
    return hs, dts, {"v": tab, "w": None}


def _write_table(path, hs, dts, table):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["h"] + [_dt_label(dt) for dt in dts])
        for h, row in zip(hs, table):
            wr.writerow([_g15(h)] + [_g15(x) for x in row])


def write_error_csv(report, directory) -> list:
    """Write ``errors_v.csv``, ``errors_w.csv`` and ``rates.csv``; returns the paths.

    ``report`` is an :class:`ErrorReport` or a mapping ``{(h, dt): E_v}``.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    hs, dts, tables = _grid_from(report)
    written = []
    for name, tab in tables.items():
        if tab is None:
            continue
        p = d / f"errors_{name}.csv"
        _write_table(p, hs, dts, tab)
        written.append(p)
    p = d / "rates.csv"
    with open(p, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["kind", "field", "fixed", "from", "to", "order"])
        for name, tab in tables.items():
            if tab is None:
                continue
            for j, dt in enumerate(dts):
                col = tab[:, j]
                for i in range(len(hs) - 1):
                    r = math.log(col[i] / col[i + 1]) / math.log(hs[i] / hs[i + 1])
                    wr.writerow(["spatial", name, _g15(dt), _g15(hs[i]), _g15(hs[i + 1]), _g15(r)])
            for i, h in enumerate(hs):
                row = tab[i, :]
                for j in range(len(dts) - 1):
                    r = math.log(row[j] / row[j + 1]) / math.log(dts[j] / dts[j + 1])
                    wr.writerow(["temporal", name, _g15(h), _g15(dts[j]), _g15(dts[j + 1]), _g15(r)])
    written.append(p)
    return written


def write_manifest(path, entries: Mapping[str, Any]) -> Path:
    """Sorted ``key = value`` lines; no timestamps, so identical runs give identical files."""
    path = Path(path)
    lines = [f"{k} = {_format_value(entries[k])}" for k in sorted(entries)]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_manifest(path) -> dict:
    out = {}
    with open(path) as fh:
        for ln in fh:
            if "=" in ln:
                k, v = ln.split("=", 1)
                out[k.strip()] = v.strip()
    return out


def config_from_manifest(path) -> RunConfig:
    """Rebuild the run configuration recorded in a ``manifest.txt``."""
    entries = read_manifest(path)
    values = {k[len("config."):]: v for k, v in entries.items() if k.startswith("config.")}
    if not values:
        raise ConfigError("manifest", f"{path} records no configuration")
    return config_from_mapping(values)


def _write_log_csv(path, traj: Trajectory):
    keys = ["step", "t", "J", "D", "picard_iterations", "norm_v", "norm_w", "cumulative_grad"]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(keys)
        for row in zip(*(traj.log[k] for k in keys)):
            wr.writerow([str(x) if isinstance(x, (int, np.integer)) else _g15(x) for x in row])


# -- jobs -----------------------------------------------------------------------


class SnapshotWriter:
    """Writes VTK snapshots on a background thread so stepping never waits on disk.

    States are copied on submission; leaving the context waits for all
    pending files and re-raises the first write error.
    """

    def __init__(self, mesh: PolygonalMesh, directory, pattern: str = "snapshot_{:06d}.vtk"):
        self.mesh = mesh
        self.directory = Path(directory)
        self.pattern = pattern
        self._pool = ThreadPoolExecutor(max_workers=1)
        self._pending = []

    def submit(self, n: int, state: FieldState, t: float):
        path = self.directory / self.pattern.format(n)
        self._pending.append(self._pool.submit(write_vtk_snapshot, self.mesh, state.copy(), path, t))

    def close(self):
        try:
            for fut in self._pending:
                fut.result()
        finally:
            self._pool.shutdown(wait=True)
            self._pending = []

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def run_job(config: RunConfig, out_dir=None, log: Callable[[str], None] | None = None):
    """Run one simulation described by ``config`` and write its outputs.

    Writes ``manifest.txt`` before stepping, then one VTK file per snapshot,
    ``log.csv`` (per-step norms) and ``snapshots.csv`` (per-snapshot range
    and spatial spread of ``v``).  Returns the trajectory.
    """
    out = Path(out_dir if out_dir is not None else config["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    mesh = config.build_mesh()
    model = config.build_model()
    grid = config.time_grid()
    disc = Discretization.build(mesh, model, config.backend)
    manifest = {f"config.{k}": v for k, v in config.items()}
    manifest.update({
        "mesh.signature": mesh.signature(),
        "mesh.n_vertices": mesh.n_vertices,
        "mesh.n_cells": mesh.n_cells,
        "mesh.h": float(mesh.h),
        "run.backend": disc.ops.backend,
        "run.dt": float(grid.dt),
        "run.version": __version__,
    })
    write_manifest(out / "manifest.txt", manifest)
    rows = []
    want_vtk = config["output.vtk"]

    with SnapshotWriter(mesh, out) as writer:
        def on_snapshot(n, s):
            t = grid.time(n)
            rows.append((n, t, float(s.v.min()), float(s.v.max()), spatial_std(s.v),
                         spatial_std(s.w)))
            if want_vtk:
                writer.submit(n, s, t)
            if log is not None:
                log(f"t={t:.6g} v in [{s.v.min():.4g}, {s.v.max():.4g}]")

        stride = config["output.stride"] or None
        times = config["output.times"] or None
        traj = run(initial_state(disc), grid, disc, config.picard(), config.linsolve(),
                   stride=stride, snapshot_times=times, on_snapshot=on_snapshot,
                   keep_snapshots=False)
    _write_log_csv(out / "log.csv", traj)
    with open(out / "snapshots.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["step", "t", "v_min", "v_max", "std_v", "std_w"])
        for r in rows:
            wr.writerow([str(r[0])] + [_g15(x) for x in r[1:]])
    return traj


def _int_list(text: str):
    return [int(t) for t in text.replace(",", " ").split()]


def _overrides(args) -> dict:
    out = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(item, "overrides take the form key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    # dedicated flags win over --set
    flags = {"mesh.family": getattr(args, "family", None), "mesh.n": getattr(args, "n", None),
             "mesh.seed": getattr(args, "seed", None), "time.T": getattr(args, "T", None),
             "time.N": getattr(args, "N", None), "experiment.backend": getattr(args, "backend", None)}
    out.update({k: str(v) for k, v in flags.items() if v is not None})
    return out


def _load_config(args, preset=None) -> RunConfig:
    overrides = _overrides(args)
    if getattr(args, "manifest", None):
        return config_from_manifest(args.manifest).with_overrides(overrides)
    if getattr(args, "config", None):
        return parse_config(args.config, preset=preset or getattr(args, "preset", None), overrides=overrides)
    return config_from_mapping(overrides, preset=preset or getattr(args, "preset", None))


def _cmd_mesh(args) -> int:
    if args.family == "squares":
        mesh = generate_square_mesh(args.n)
    elif args.family == "distorted":
        mesh = generate_distorted_quad_mesh(args.n, args.amplitude, args.seed)
    else:
        mesh = generate_voronoi_mesh(args.n * args.n, args.lloyd_iterations, args.seed)
    save_mesh(mesh, args.out)
    print(f"wrote {args.out}: {mesh.n_vertices} vertices, {mesh.n_cells} cells, "
          f"h={mesh.h:.6g}, signature {mesh.signature()}")
    return 0


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    run_job(cfg, args.out, log=None if args.quiet else print)
    return 0


def _convergence(args, cfg: RunConfig, out: Path) -> ErrorReport:
    out.mkdir(parents=True, exist_ok=True)
    levels, steps = _int_list(args.levels), _int_list(args.steps)
    diffusion = cfg.build_model().diffusion
    manifest = {f"config.{k}": v for k, v in cfg.items()
                if k.split(".")[0] in ("diffusion", "picard", "linsolve", "experiment")}
    manifest.update({"study.levels": " ".join(map(str, levels)),
                     "study.steps": " ".join(map(str, steps)),
                     "study.family": args.family or "distorted", "study.seed": args.seed or 0,
                     "study.ref_n": args.ref_n, "study.ref_N": args.ref_N, "study.T": args.T_final,
                     "run.version": __version__})
    write_manifest(out / "manifest.txt", manifest)

    def progress(n, N, ev, ew):
        if not args.quiet:
            print(f"h=1/{n} dt={args.T_final}/{N}: E_v={ev:.6e} E_w={ew:.6e}")

    report = run_example1(levels, steps, args.family or "distorted", args.ref_n, args.ref_N,
                          args.T_final, args.seed or 0, picard=cfg.picard(),
                          linsolve=cfg.linsolve(), diffusion=diffusion, backend=cfg.backend,
                          progress=progress)
    write_error_csv(report, out)
    return report


def _cmd_convergence(args) -> int:
    cfg = _load_config(args, preset="example1")
    _convergence(args, cfg, Path(args.out))
    return 0


def _cmd_example(args) -> int:
    if args.id == 1:
        args.levels = args.levels or "8,16,32,64"
        args.steps = args.steps or "10,20,40,80"
        cfg = _load_config(args, preset="example1")
        _convergence(args, cfg, Path(args.out))
        return 0
    cfg = _load_config(args, preset=f"example{args.id}")
    run_job(cfg, args.out, log=None if args.quiet else print)
    return 0


def _add_config_flags(p, with_mesh=True):
    p.add_argument("--config", help="config file (INI key = value sections)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key, e.g. --set picard.tol=1e-10 (repeatable)")
    p.add_argument("--backend", choices=("auto",) + tuple(BACKENDS), help="kernel backend")
    if with_mesh:
        p.add_argument("--family", choices=("squares", "distorted", "voronoi"))
        p.add_argument("--n", type=int, help="mesh resolution, h = 1/n")
        p.add_argument("--seed", type=int)
        p.add_argument("--T", type=float, help="final time")
        p.add_argument("--N", type=int, help="number of time steps")
    p.add_argument("--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vemfhn", description="Virtual element solver for the "
                                 "nonlocal FitzHugh-Nagumo system.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="generate a mesh and write it in POLYMESH format")
    p.add_argument("--family", choices=("squares", "distorted", "voronoi"), required=True)
    p.add_argument("--n", type=int, required=True, help="cells per side (voronoi: n*n seeds)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--amplitude", type=float, default=0.2)
    p.add_argument("--lloyd-iterations", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mesh)

    p = sub.add_parser("run", help="run one simulation from a config file and flags")
    p.add_argument("--preset", choices=tuple(PRESETS))
    p.add_argument("--out", help="output directory (default: output.dir)")
    p.add_argument("--manifest", help="rerun the configuration recorded in a manifest.txt")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_run)

    for name, helptext in (("convergence", "error grid against a fine reference"),
                           ("example", "run one of the three benchmark setups")):
        p = sub.add_parser(name, help=helptext)
        if name == "example":
            p.add_argument("--id", type=int, choices=(1, 2, 3), required=True)
        p.add_argument("--levels", default=None if name == "example" else "8,16,32",
                       help="comma-separated mesh counts n (h = 1/n)")
        p.add_argument("--steps", default=None if name == "example" else "10,20,40,80",
                       help="comma-separated step counts N (dt = T/N)")
        p.add_argument("--ref-n", type=int, default=128)
        p.add_argument("--ref-N", type=int, default=800)
        p.add_argument("--T-final", type=float, default=1.0, help="final time of the study")
        p.add_argument("--out", required=True)
        _add_config_flags(p)
        p.set_defaults(func=_cmd_convergence if name == "convergence" else _cmd_example)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (VemError, OSError) as exc:
        print(f"vemfhn: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
