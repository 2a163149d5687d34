"""Command-line interface: outputs, layering and exit codes."""
import csv
import json
import math
import subprocess
import sys

import pytest

from fragkin.cli import run


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_phi_example5(capsys):
    assert run(["phi", "--example", "5", "--grid", "0.5,1,3"]) == 0
    rep = _json(capsys)
    for row in rep["rows"]:
        assert row["phi"] == pytest.approx(1 - 2 ** -row["s"], rel=1e-12)
    assert rep["kappa"] == pytest.approx(math.log(2))


def test_phi_csv_and_rate_columns(tmp_path, capsys):
    out = tmp_path / "phi.csv"
    assert run(["phi", "--example", "3", "--grid", "2,8", "--gamma-tail", "1", "--csv", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [float(r["s"]) for r in rows] == [2.0, 8.0]
    # Example 3 with gamma = 1/2, alpha = -1: phi(t) = 2 Gamma(t/2 + 1/2) / Gamma(t/2)
    assert float(rows[1]["phi"]) == pytest.approx(2 * math.gamma(4.5) / math.gamma(4.0), rel=1e-12)
    assert all(r["h"] for r in rows)


def test_missing_subcommand_exits_2(capsys):
    assert run([]) == 2
    assert "subcommand" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["mass"],
    ["mass", "--example", "1"],
    ["mass", "--example", "9", "--t", "1"],
    ["phi", "--example", "2", "--gamma", "1.5"],
    ["unbounded", "--example", "1", "--t", "1", "--tail", "cubic:1:2"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert run(argv) == 2


def test_bad_config_reports_location(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"example": 1,\n  "t": [1, }')
    assert run(["mass", "--config", str(p)]) == 2
    assert f"{p}:2:" in capsys.readouterr().err


def test_unknown_config_field(tmp_path, capsys):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"example": 1, "t": [1.0], "n_reps": 10}))
    assert run(["mass", "--config", str(p)]) == 2
    assert "n_reps" in capsys.readouterr().err


def test_mass_csv_example3(tmp_path, capsys):
    out = tmp_path / "m.csv"
    assert run(["mass", "--example", "3", "--t", "0.5,1", "--n-rep", "20000", "--seed", "1", "--csv", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["t", "mass", "se", "exact", "z"]
    for r in rows:
        assert float(r["exact"]) == pytest.approx(math.exp(-float(r["t"]) ** 2), rel=1e-15)
        assert abs(float(r["z"])) <= 3
    assert _json(capsys)["passed"] is True


def test_json_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert run(["mass", "--example", "1", "--t", "1,2", "--n-rep", "3000", "--seed", "4", "--output", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_seed_layering(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"example": 1, "t": [1.0], "n_rep": 500, "seed": 1}))
    assert run(["mass", "--config", str(cfg)]) in (0, 1)
    assert _json(capsys)["metadata"]["seed"] == 1
    monkeypatch.setenv("FRAGKIN_SEED", "5")
    assert run(["mass", "--config", str(cfg)]) in (0, 1)
    assert _json(capsys)["metadata"]["seed"] == 5
    assert run(["mass", "--config", str(cfg), "--seed", "9"]) in (0, 1)
    assert _json(capsys)["metadata"]["seed"] == 9
    monkeypatch.setenv("FRAGKIN_SEED", "x")
    assert run(["mass", "--config", str(cfg)]) == 2


def test_config_measure_block(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"measure": {"family": "example1", "b": 2.0, "alpha": -1.0}, "grid": [1.0]}))
    assert run(["phi", "--config", str(cfg)]) == 0
    assert _json(capsys)["rows"][0]["phi"] == pytest.approx(1 / 3)


def test_simulate_csv(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert run(["simulate", "--example", "1", "--t", "0.5", "--n-rep", "50", "--csv", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["replicate", "t", "alive", "value"]
    assert len(rows) == 51
    assert all((r[2] == "1") == (float(r[3]) > 0) for r in rows[1:])


def test_qs_and_atom_reports(capsys):
    assert run(["qs", "--example", "1", "--lam", "2", "--t", "0.5", "--n-rep", "5000"]) == 0
    assert _json(capsys)["report"]["lam"] == 2.0
    assert run(["atom", "--example", "5", "--t", "1", "--n-rep", "5000"]) == 0
    assert _json(capsys)["report"]["ratio_branch"] == "atom"


def test_precondition_failure_is_usage_error(capsys):
    # window statistics reject lattice measures
    assert run(["windows", "--example", "5", "--t", "2"]) == 2


def test_console_script_version():
    out = subprocess.run([sys.executable, "-m", "fragkin.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "fragkin" in out.stdout
