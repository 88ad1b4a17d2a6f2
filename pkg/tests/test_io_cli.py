import csv
import subprocess
import sys

import numpy as np
import pytest

from vemfhn.errors import ConfigError
from vemfhn.io_cli import (PRESETS, SCHEMA, config_from_manifest, config_from_mapping, main,
                           parse_config, read_manifest, read_vtk_snapshot, write_error_csv,
                           write_manifest, write_vtk_snapshot)
from vemfhn.experiments import ErrorReport
from vemfhn.mesh import generate_square_mesh, generate_voronoi_mesh, load_mesh
from vemfhn.timestepper import FieldState


# -- config ---------------------------------------------------------------------


def test_presets_cover_schema():
    for name, vals in PRESETS.items():
        assert set(vals) == set(SCHEMA), name


def test_empty_file_gives_preset_defaults(tmp_path):
    p = tmp_path / "empty.ini"
    p.write_text("")
    cfg = parse_config(p, preset="example1")
    assert dict(cfg.items()) == PRESETS["example1"]
    assert cfg.preset == "example1"
    assert cfg.time_grid().dt == pytest.approx(1 / 80)


def test_zero_steps_is_range_error(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[time]\nN = 0\n")
    with pytest.raises(ConfigError) as exc:
        parse_config(p, preset="example1")
    assert exc.value.key == "time.N"
    assert "time.N" in str(exc.value)


def test_tolerance_parsed_exactly(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[picard]\ntol = 1e-8\n")
    assert parse_config(p)["picard.tol"] == 1e-8


@pytest.mark.parametrize("body,key", [
    ("[time]\nsteps = 5\n", "time.steps"),
    ("[mesh]\nn = eight\n", "mesh.n"),
    ("[mesh]\nfamily = hexagons\n", "mesh.family"),
    ("[picard]\ndamping = 1.5\n", "picard.damping"),
    ("[stimulus]\nt_on = 2\nt_off = 1\n", "stimulus.t_off"),
])
def test_bad_keys_and_values(tmp_path, body, key):
    p = tmp_path / "c.ini"
    p.write_text(body)
    with pytest.raises(ConfigError) as exc:
        parse_config(p)
    assert exc.value.key == key


def test_inline_comments(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[mesh]\nfamily = voronoi   ; polygonal\nn = 12  # cells per side\n")
    cfg = parse_config(p)
    assert cfg["mesh.family"] == "voronoi" and cfg["mesh.n"] == 12


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "nope.ini")


def test_overrides_win_over_file(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[mesh]\nn = 8\n[time]\nN = 40\n")
    cfg = parse_config(p, overrides={"mesh.n": "4"})
    assert cfg["mesh.n"] == 4 and cfg["time.N"] == 40
    assert cfg.with_overrides({"time.N": 7})["time.N"] == 7


def test_model_from_config():
    cfg = config_from_mapping({"initial.preset": "constant", "initial.v": "0.3"}, preset="example2")
    model = cfg.build_model()
    assert model.kinetics.lam == -100.0 and model.stimulus is not None
    assert model.initial.v0(np.array([0.2]), np.array([0.9]))[0] == 0.3


# -- VTK ------------------------------------------------------------------------


def test_vtk_single_cell(tmp_path):
    m = generate_square_mesh(1)
    path = tmp_path / "s.vtk"
    f = write_vtk_snapshot(m, FieldState(np.zeros(4), np.zeros(4), 0.0), path)
    assert f.path == path and f.fields == ("v", "w")
    text = path.read_text().splitlines()
    assert "POINTS 4 double" in text
    assert "CELLS 1 5" in text
    assert "CELL_TYPES 1" in text
    assert text.count("SCALARS v double 1") == 1 and text.count("SCALARS w double 1") == 1
    pts, cells, fields = read_vtk_snapshot(path)
    assert len(cells) == 1 and len(cells[0]) == 4
    vals = np.concatenate([fields["v"], fields["w"]])
    assert vals.shape == (8,) and np.all(vals == 0)


def test_vtk_cells_size_field(tmp_path):
    m = generate_square_mesh(2)
    path = tmp_path / "s.vtk"
    write_vtk_snapshot(m, FieldState(np.zeros(9), np.zeros(9), 0.0), path)
    lines = path.read_text().splitlines()
    assert "CELLS 4 20" in lines
    i = lines.index("CELL_TYPES 4")
    assert lines[i + 1:i + 5] == ["7"] * 4


def test_vtk_round_trip_and_determinism(tmp_path):
    m = generate_voronoi_mesh(30, seed=4)
    rng = np.random.default_rng(0)
    s = FieldState(rng.normal(size=m.n_vertices), rng.normal(size=m.n_vertices), 0.5)
    a, b = tmp_path / "a.vtk", tmp_path / "b.vtk"
    write_vtk_snapshot(m, s, a)
    write_vtk_snapshot(m, s, b)
    assert a.read_bytes() == b.read_bytes()
    pts, cells, fields = read_vtk_snapshot(a)
    assert np.array_equal(pts, m.vertices)
    assert np.array_equal(fields["v"], s.v) and np.array_equal(fields["w"], s.w)
    for k, ids in enumerate(cells):
        assert list(ids) == list(m.cell_vertex_ids(k))


def test_vtk_size_mismatch_and_io_error(tmp_path):
    m = generate_square_mesh(1)
    with pytest.raises(ValueError):
        write_vtk_snapshot(m, FieldState(np.zeros(3), np.zeros(3), 0.0), tmp_path / "x.vtk")
    with pytest.raises(OSError, match="nodir"):
        write_vtk_snapshot(m, FieldState(np.zeros(4), np.zeros(4), 0.0), tmp_path / "nodir" / "x.vtk")


# -- CSV and manifest -----------------------------------------------------------


def test_csv_single_entry(tmp_path):
    write_error_csv({(1 / 8, 1 / 10): 0.5}, tmp_path)
    lines = (tmp_path / "errors_v.csv").read_text().splitlines()
    assert lines == ["h,dt_1_10", "0.125,0.5"]


def test_csv_grid_layout_and_precision(tmp_path):
    rng = np.random.default_rng(1)
    Ev, Ew = rng.uniform(1e-4, 1, (4, 4)), rng.uniform(1e-4, 1, (4, 4))
    rep = ErrorReport([8, 16, 32, 64], [10, 20, 40, 80], 1.0, Ev, Ew)
    write_error_csv(rep, tmp_path)
    for name, tab in (("v", Ev), ("w", Ew)):
        lines = (tmp_path / f"errors_{name}.csv").read_text().splitlines()
        assert len(lines) == 5
        assert lines[0] == "h,dt_1_10,dt_1_20,dt_1_40,dt_1_80"
        rows = list(csv.reader(lines[1:]))
        back = np.array([[float(x) for x in r[1:]] for r in rows])
        assert np.allclose(back, tab, rtol=1e-14, atol=0)
        assert np.array_equal(back, np.array([[float(f"{x:.15g}") for x in r] for r in tab]))
    rates = list(csv.DictReader(open(tmp_path / "rates.csv")))
    assert len(rates) == 2 * (4 * 3 + 4 * 3)


def test_manifest_sorted_and_round_trip(tmp_path):
    cfg = config_from_mapping({"mesh.n": 4}, preset="example3")
    entries = {f"config.{k}": v for k, v in cfg.items()}
    entries["run.version"] = "x"
    p = write_manifest(tmp_path / "manifest.txt", entries)
    keys = [ln.split(" = ")[0] for ln in p.read_text().splitlines()]
    assert keys == sorted(keys)
    assert read_manifest(p)["run.version"] == "x"
    again = config_from_manifest(p)
    assert dict(again.items()) == dict(cfg.items())


# -- CLI ------------------------------------------------------------------------


def test_cli_mesh(tmp_path, capsys):
    out = tmp_path / "m.poly"
    assert main(["mesh", "--family", "voronoi", "--n", "4", "--seed", "2", "--out", str(out)]) == 0
    assert load_mesh(out).n_cells == 16
    assert "16 cells" in capsys.readouterr().out


def test_cli_run_and_manifest_rerun(tmp_path):
    cfgfile = tmp_path / "c.ini"
    cfgfile.write_text("[mesh]\nn = 16\n[time]\nT = 0.1\nN = 4\n[output]\nstride = 2\n")
    a, b = tmp_path / "a", tmp_path / "b"
    # flag beats the file
    assert main(["run", "--config", str(cfgfile), "--n", "4", "--out", str(a), "--quiet"]) == 0
    man = read_manifest(a / "manifest.txt")
    assert man["config.mesh.n"] == "4" and man["mesh.n_cells"] == "16"
    assert sorted(p.name for p in a.glob("*.vtk")) == [
        "snapshot_000000.vtk", "snapshot_000002.vtk", "snapshot_000004.vtk"]
    log = (a / "log.csv").read_text().splitlines()
    assert len(log) == 1 + 5  # header, step 0 and four steps
    assert main(["run", "--manifest", str(a / "manifest.txt"), "--out", str(b), "--quiet"]) == 0
    for name in ("manifest.txt", "log.csv", "snapshots.csv", "snapshot_000004.vtk"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_cli_reports_config_errors(tmp_path, capsys):
    assert main(["run", "--set", "time.N=0", "--out", str(tmp_path), "--quiet"]) == 2
    assert "time.N" in capsys.readouterr().err
    assert main(["run", "--set", "bogus.key=1", "--out", str(tmp_path), "--quiet"]) == 2


def test_cli_convergence_small(tmp_path):
    rc = main(["convergence", "--levels", "2,4", "--steps", "2,4", "--ref-n", "8", "--ref-N", "8",
               "--T-final", "0.1", "--out", str(tmp_path), "--quiet"])
    assert rc == 0
    lines = (tmp_path / "errors_v.csv").read_text().splitlines()
    assert lines[0] == "h,dt_1_20,dt_1_40" and len(lines) == 3
    assert (tmp_path / "errors_w.csv").exists() and (tmp_path / "rates.csv").exists()


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "vemfhn", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
