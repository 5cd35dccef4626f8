import json
import os
import subprocess
import sys

import numpy as np
import pytest

from fbmcf import cli
from fbmcf import geometry as geo
from fbmcf.config import OUTPUT_ENV, RunConfig, apply_overrides, load_config, parse_config, parse_value
from fbmcf.exceptions import ConfigError
from fbmcf.flow import FlowConfig, run
from fbmcf.io import SchemaError, load_manifest, load_trajectory, read_csv, write_csv, write_run

HALF = """\
# small shrinking half-sphere
scenario = hs
surface.kind = half_sphere
surface.nodes = 48
flow.max_time = 1.0
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "hs.cfg"
    p.write_text(HALF)
    return str(p)


@pytest.fixture(scope="module")
def stored_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("run") / "hs"
    cfg = parse_config(HALF)
    assert cli.execute(cfg, str(d)) == cli.EXIT_OK
    return str(d)


# -- value grammar -------------------------------------------------------------
@pytest.mark.parametrize("text,value", [
    ("true", True), ("False", False), ("none", None), ("12", 12), ("-3", -3),
    ("1.5", 1.5), ("1e-3", 1e-3), (".5", 0.5), ("0.1, 0.2", [0.1, 0.2]), ("0.05,", [0.05]),
    ("cap45", "cap45"),
])
def test_parse_value(text, value):
    assert parse_value(text) == value


def test_parse_value_rejects_mixed_list():
    with pytest.raises(ConfigError):
        parse_value("1, a")


# -- config files ----------------------------------------------------------------
def test_parse_config_and_derived_objects():
    cfg = parse_config(HALF)
    assert cfg.scenario == "hs" and cfg.seed == 0
    assert cfg.flow_config().max_time == 1.0
    c = cfg.initial_curve()
    assert c.n_nodes == 48 and c.barrier.kind == "plane"


@pytest.mark.parametrize("text,match", [
    ("a = 1\na = 2\n", "duplicate"),
    ("surface.colour = red\n", "unknown"),
    ("no equals sign\n", "key = value"),
    ("Bad-Key = 1\n", "malformed"),
    ("surface.nodes = 8\n", "nodes"),
    ("surface.kind = torus\n", "surface.kind"),
    ("surface.kind = spherical_cap\nsurface.theta_deg = 95\n", "theta"),
    ("surface.kind = half_sphere\nbarrier.kind = sphere\n", "barrier"),
    ("flow.c_cfl = 0.9\n", "flow"),
    ("stampacchia.p = 3\n", "p must"),
])
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_to_text_roundtrip():
    cfg = parse_config(HALF + "surface.amplitudes = 0.05,\ndiagnostics.sigma = 0.2\n")
    again = parse_config(cfg.to_text())
    assert again.values == cfg.values
    assert again.to_text() == cfg.to_text()


def test_overrides(cfg_file):
    cfg = load_config(cfg_file, ["surface.nodes=64", "flow.c_cfl=0.1"])
    assert cfg.get("surface.nodes") == 64 and cfg.flow_config().c_cfl == 0.1
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["surface.nodes"])


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "nope.cfg"))


def test_output_env_overrides_dir(monkeypatch):
    cfg = parse_config(HALF + "output.dir = somewhere\n")
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    assert cfg.output_dir() == "somewhere"
    monkeypatch.setenv(OUTPUT_ENV, "/tmp/elsewhere")
    assert cfg.output_dir() == "/tmp/elsewhere"


@pytest.mark.parametrize("kind", ["half_sphere", "perturbed_half_sphere", "spherical_cap",
                                  "perturbed_cap", "equatorial_disk"])
def test_every_surface_kind_builds(kind):
    cfg = RunConfig({"surface.kind": kind, "surface.nodes": 40}).validate()
    assert cfg.initial_curve().n_nodes == 40


def test_shipped_configs_parse():
    root = os.path.join(os.path.dirname(__file__), "..", "configs")
    for name in sorted(os.listdir(root)):
        if name.endswith(".cfg"):
            load_config(os.path.join(root, name))


# -- persistence -----------------------------------------------------------------
def test_csv_roundtrip_and_schema(tmp_path):
    p = tmp_path / "x.csv"
    write_csv(p, ("a", "b"), [{"a": 1, "b": 0.1}, {"a": 2, "b": np.float64(1 / 3)}])
    cols, rows = read_csv(p)
    assert cols == ("a", "b")
    assert float(rows[1]["b"]) == 1 / 3  # 17 significant digits round-trip
    p.write_text("# schema_version=99\n" + p.read_text().split("\n", 1)[1])
    with pytest.raises(SchemaError):
        read_csv(p)


def test_run_roundtrip(tmp_path):
    tr = run(FlowConfig(window_every=10), geo.spherical_cap(0.7, 40))
    write_run(str(tmp_path), "scenario = x\n", tr, [])
    manifest, back = load_trajectory(str(tmp_path))
    assert manifest["n_snapshots"] == len(tr.snapshots)
    assert len(back.windows) == len(tr.windows)
    for a, b in zip(tr.snapshots, back.snapshots):
        assert a.t == b.t and a.epoch == b.epoch
        np.testing.assert_array_equal(a.curve.r, b.curve.r)
        np.testing.assert_array_equal(a.curve.z, b.curve.z)
    assert back.snapshots[0].curve.barrier.kind == "sphere"


def test_missing_and_mismatched_manifest(tmp_path):
    with pytest.raises(ConfigError):
        load_manifest(str(tmp_path))
    (tmp_path / "manifest.json").write_text(json.dumps({"schema_version": 0}))
    with pytest.raises(SchemaError):
        load_manifest(str(tmp_path))


# -- command line ----------------------------------------------------------------
def test_run_command(cfg_file, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", cfg_file, "--output", str(out)]) == cli.EXIT_OK
    for f in ("manifest.json", "snapshots.jsonl", "windows.jsonl", "records.csv",
              "diagnostics.csv"):
        assert (out / f).is_file()
    m = load_manifest(str(out))
    assert m["termination"]["kind"] == "blowup"
    assert m["summary"]["T_est"] == pytest.approx(0.25, rel=1e-2)


def test_run_command_config_errors(cfg_file, tmp_path):
    assert cli.main(["run", str(tmp_path / "missing.cfg")]) == cli.EXIT_CONFIG
    assert cli.main(["run", cfg_file, "--set", "surface.nodes=4"]) == cli.EXIT_CONFIG


def test_run_command_numerical_failure(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("surface.kind = perturbed_cap\nsurface.amplitudes = 0.0, 0.05\n"
                 "surface.nodes = 64\n")
    assert cli.main(["run", str(p), "--output", str(tmp_path / "o")]) == cli.EXIT_NUMERICAL


@pytest.mark.parametrize("suite", ["evolution_residuals", "boundary", "inequalities", "pinching"])
def test_verify_suites_pass(stored_run, suite):
    assert cli.main(["verify", stored_run, suite]) == cli.EXIT_OK
    rep = json.loads(open(os.path.join(stored_run, f"verify_{suite}.json")).read())
    assert rep["passed"] and rep["reports"][0]["checks"]


def test_verify_missing_run(tmp_path):
    assert cli.main(["verify", str(tmp_path), "all"]) == cli.EXIT_CONFIG


def test_report(stored_run, capsys):
    assert cli.main(["report", stored_run]) == cli.EXIT_OK
    text = capsys.readouterr().out
    assert "termination" in text and "ratio_AH" in text
    for f in ("report.csv", "report.json", "report.txt"):
        assert os.path.isfile(os.path.join(stored_run, f))


def test_sweep(cfg_file, tmp_path):
    out = tmp_path / "sweep"
    assert cli.main(["sweep", cfg_file, "surface.nodes=32,48,64", "--output", str(out),
                     "--jobs", "1"]) == cli.EXIT_OK
    cols, rows = read_csv(out / "summary.csv")
    assert len(rows) == 3 and "order_T_est" in cols
    assert all(r["passed"] == "1" for r in rows)


def test_sweep_bad_axis(cfg_file, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli.main(["sweep", cfg_file, "surface.nodes"]) == cli.EXIT_CONFIG
    assert cli.main(["sweep", cfg_file, "surface.nodes=4"]) == cli.EXIT_CONFIG
    assert not os.path.exists(tmp_path / "runs")


def test_runs_are_byte_identical(cfg_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", cfg_file, "--output", str(a)]) == 0
    assert cli.main(["run", cfg_file, "--output", str(b)]) == 0
    for f in ("manifest.json", "snapshots.jsonl", "windows.jsonl", "records.csv",
              "diagnostics.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_module_entry_point(cfg_file, tmp_path):
    r = subprocess.run([sys.executable, "-m", "fbmcf", "run", cfg_file, "--output",
                        str(tmp_path / "m")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
