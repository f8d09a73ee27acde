import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from mugrid.cli import dispatch
from mugrid.netmodel import InterfaceParams, save_network
from mugrid.pipeline import SweepConfig, run_case, summarize, sweep, to_csv

from conftest import chain, two_bus


def write(path, obj):
    path.write_text(json.dumps(obj), encoding="utf-8")
    return str(path)


@pytest.fixture
def grid(tmp_path):
    net = two_bus(g=0.1, b=-1.0)
    p = np.array([np.sin(0.1), -np.sin(0.1)])
    good = tmp_path / "good.json"
    save_network(good, net, InterfaceParams((0, 1), [0.5, 0.5], [2.0, 2.0], p))
    bad = tmp_path / "bad.json"
    save_network(bad, net, InterfaceParams((0, 1), [5.0, 5.0], [1.0, 1.0], p))
    return tmp_path, str(good), str(bad)


def run(argv, capsys):
    code = dispatch(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_powerflow_emits_equilibrium(grid, capsys):
    tmp, good, _ = grid
    code, out, _ = run(["powerflow", "--net", good, "--ref", "1"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert {"delta", "residual", "in_omega", "phi_margin", "manifest"} <= doc.keys()
    assert doc["residual"] <= 1e-10 and doc["in_omega"]
    assert doc["manifest"]["subcommand"] == "powerflow"
    assert doc["manifest"]["inputs"]["net"] == good


def test_certify_strict_exit_codes(grid, capsys):
    tmp, good, bad = grid
    eq = write(tmp / "eq.json", {"delta": [0.0, 0.0]})
    code, out, err = run(["certify", "--net", good, "--equilibrium", eq, "--strict"], capsys)
    assert code == 0 and json.loads(out)["verdict"] == "certified"
    assert "verdict: certified" in err and "S_i" in err
    code, out, _ = run(["certify", "--net", bad, "--equilibrium", eq, "--strict"], capsys)
    assert code == 2 and json.loads(out)["offending"] == [0, 1]
    code, _, _ = run(["certify", "--net", bad, "--equilibrium", eq], capsys)
    assert code == 0


def test_certify_variants(grid, capsys):
    tmp, good, _ = grid
    code, out, _ = run(["certify", "--net", good, "--topology-only"], capsys)
    assert code == 0 and json.loads(out)["which_condition"] == "cor1"
    net = chain([complex(0.1, -0.6), complex(0.2, -1.1)], kinds=["active", "passive", "active"])
    path = tmp / "sp.json"
    save_network(path, net, InterfaceParams((0, 2), [0.5, 0.5], [2.0, 2.0], [0.0, 0.0]))
    eq = write(tmp / "eqa.json", {"delta": [0.05, -0.05]})
    code, out, _ = run(["certify", "--net", str(path), "--equilibrium", eq, "--structure-preserving",
                        "--active", "0,2", "--nu-min", "5", "--nu-max", "7.14", "--strict"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["which_condition"] == "thm2" and doc["cross_check"]


def test_certify_without_equilibrium_is_usage_error(grid, capsys):
    _, good, _ = grid
    code, _, err = run(["certify", "--net", good], capsys)
    assert code == 1 and "usage" in err


def test_unknown_flag_and_subcommand(capsys):
    code, _, err = run(["certify", "--bogus"], capsys)
    assert code == 1 and "usage:" in err
    code, _, err = run(["frobnicate"], capsys)
    assert code == 1 and "usage:" in err


def test_missing_file_is_error(capsys, tmp_path):
    code, _, err = run(["powerflow", "--net", str(tmp_path / "nope.json")], capsys)
    assert code == 1 and "FileNotFoundError" in err


def test_spectrum_csv_and_classification(grid, capsys):
    tmp, good, _ = grid
    eq = write(tmp / "eq.json", {"delta": [0.0, 0.0]})
    code, out, err = run(["spectrum", "--net", good, "--equilibrium", eq], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["re", "im"] and len(rows) == 5
    doc = json.loads(err)
    assert doc["zero_count"] == 1 and doc["lhp"] and "max_real_nonzero" in doc


def test_simulate_outputs(grid, capsys):
    tmp, good, _ = grid
    init = write(tmp / "init.json", {"delta": [0.12, 0.0]})
    out_json = tmp / "cls.json"
    code, out, _ = run(["simulate", "--net", good, "--initial", init, "--T", "20", "--store-every", "1000",
                        "--out", str(out_json)], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["t", "delta_0", "delta_1", "omega_0", "omega_1"]
    assert len(rows) == 22
    doc = json.loads(out_json.read_text())
    assert doc["classification"] == "converged" and "manifest" in doc


def test_kron_outputs(tmp_path, capsys):
    ya, yb = complex(0.1, -0.6), complex(0.2, -1.1)
    path = tmp_path / "c.json"
    save_network(path, chain([ya, yb]))
    code, out, _ = run(["kron", "--net", str(path), "--passive", "1", "--check-assumptions"], capsys)
    assert code == 0
    doc = json.loads(out)
    ys = ya * yb / (ya + yb)
    line = doc["network"]["lines"][0]
    assert complex(line["g"], line["b"]) == pytest.approx(ys, abs=1e-12)
    assert doc["trace"]["kept"] == [0, 2] and doc["trace"]["assumptions_hold"]
    assert "manifest" in doc["network"] and "manifest" in doc["trace"]


def test_tune_produces_certified_plan(grid, capsys):
    tmp, _, bad = grid
    eq = write(tmp / "eq.json", {"delta": [0.0, 0.0]})
    bounds = write(tmp / "b.json", {"d_min": 0.1, "d_max": 10, "m_min": 0.1, "m_max": 10})
    code, out, _ = run(["tune", "--net", bad, "--equilibrium", eq, "--bounds", bounds, "--strict"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["feasible"] and doc["changed"] == [0, 1]
    assert doc["report"]["verdict"] == "certified"
    for p in doc["params"]:
        assert p["d"] ** 2 / (2 * p["m"]) >= 1.0 + 0.01 - 1e-12


def test_synth_is_byte_stable(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert dispatch(["--reproducible", "synth", "--n", "12", "--seed", "42", "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert len(doc["nodes"]) == 12 and len(doc["interface"]) == 12
    assert doc["manifest"]["wall_time_s"] is None


def test_synth_range_override(tmp_path):
    path = tmp_path / "s.json"
    assert dispatch(["synth", "--n", "6", "--d-range", "5", "5", "--out", str(path)]) == 0
    assert all(p["d"] == 5.0 for p in json.loads(path.read_text())["interface"])


def test_sweep_byte_stable_and_parallel(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert dispatch(["sweep", "--n", "15", "--cases", "4", "--seed", "7", "--out", str(a)]) == 0
    capsys.readouterr()
    assert dispatch(["sweep", "--n", "15", "--cases", "4", "--seed", "7", "--jobs", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(io.StringIO(a.read_text())))
    assert [r["case"] for r in rows] == ["0", "1", "2", "3"]
    summary = json.loads(capsys.readouterr().out)
    assert summary["cases"] == 4 and summary["counterexamples"] == 0


def test_sweep_zero_cases(tmp_path, capsys):
    out = tmp_path / "z.csv"
    assert dispatch(["sweep", "--cases", "0", "--out", str(out)]) == 0
    assert out.read_text().count("\n") == 1


def test_jobs_default_from_environment(monkeypatch):
    from mugrid.cli import build_parser

    monkeypatch.setenv("MUGRID_JOBS", "3")
    assert build_parser().parse_args(["sweep"]).jobs == 3


def test_pipeline_case_failure_is_recorded(monkeypatch):
    import mugrid.pipeline as pl

    def boom(*a, **k):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(pl, "generate_case", boom)
    res = run_case(SweepConfig(cases=1), 0)
    assert res.error.startswith("RuntimeError")
    assert summarize([res])["errors"] == 1
    assert "synthetic failure" in to_csv([res])


def test_pipeline_soundness_n50():
    results = sweep(SweepConfig(cases=10, seed=3, n=50))
    s = summarize(results)
    assert s["errors"] == 0 and s["counterexamples"] == 0
    assert s["certified_lhp"] == s["certified"] == 10


def test_console_module_entry(tmp_path):
    out = subprocess.run([sys.executable, "-m", "mugrid.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("mugrid ")
