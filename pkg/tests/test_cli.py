"""Command-line interface: exit codes, output formats, golden values."""

import csv
import json
import math

import pytest

from lorentzgas import cli

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_kernel_eval_golden_value(capsys):
    code, out, _ = run(capsys, "kernel", "eval", "--s", "1.0",
                       "--h", "0.5", "--hprime", "0.0")
    assert code == 0
    assert "P=0.303964" in out


def test_cf_params_golden_example(capsys):
    theta = math.atan(GOLDEN)
    r = 0.05 * math.cos(theta)
    code, out, _ = run(capsys, "cf", "params", "--theta", str(theta),
                       "--r", str(r))
    assert code == 0
    payload = json.loads(out[out.index("{"):])
    assert payload["A"] == pytest.approx(0.098301, abs=1e-6)
    assert payload["B"] == pytest.approx(0.442719, abs=1e-6)
    assert payload["Q"] == pytest.approx(0.5, abs=1e-9)
    assert payload["Qbar"] == pytest.approx(0.8, abs=1e-9)
    assert payload["sigma"] == -1


def test_billiard_trace_csv(tmp_path, capsys):
    path = tmp_path / "trace.csv"
    code, _, _ = run(capsys, "billiard", "trace", "--x", "0.31", "--y",
                     "0.47", "--theta", "0.83", "--r", "0.15", "--n", "5",
                     "--output", str(path))
    assert code == 0
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# lorentzgas")
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 5
    for row in rows:
        assert abs(float(row["h"])) <= 1.0


def test_billiard_transfer(capsys):
    code, out, _ = run(capsys, "billiard", "transfer", "--hprime", "0.3",
                       "--theta", "0.5", "--r", "1e-4")
    assert code == 0
    assert out.startswith("S=") and " h=" in out


def test_mc_markov_csv_and_sidecar(tmp_path, capsys):
    path = tmp_path / "mk.csv"
    code, _, _ = run(capsys, "mc", "markov", "--n", "30", "--tend", "60",
                     "--seed", "1", "--output", str(path))
    assert code == 0
    lines = path.read_text().splitlines()
    rows = list(csv.DictReader(lines[1:]))
    total = sum(float(r["prob"]) for r in rows)
    assert total == pytest.approx(1.0, abs=1e-9)
    meta = json.loads((tmp_path / "mk.csv.json").read_text())
    assert meta["n_eff"] > 0


def test_plot_data_long_format(tmp_path, capsys):
    src = tmp_path / "src.csv"
    src.write_text("a,b\n1,2\n3,4\n")
    dst = tmp_path / "long.csv"
    code, _, _ = run(capsys, "plot-data", "--input", str(src),
                     "--output", str(dst))
    assert code == 0
    rows = list(csv.DictReader(dst.read_text().splitlines()[1:]))
    assert {(r["row"], r["variable"], r["value"]) for r in rows} == {
        ("0", "a", "1"), ("0", "b", "2"), ("1", "a", "3"), ("1", "b", "4")}


def test_solve_end_to_end(tmp_path, capsys):
    cfgpath = tmp_path / "cfg.json"
    cfgpath.write_text(json.dumps({
        "grids": {"n_x": 4, "n_omega": 8, "n_s": 16, "n_h": 8,
                  "s_max": 10.0},
        "initial": {"kind": "cosine", "params": {}},
        "t_end": 0.25, "reports": {"every": 0.25}}))
    code, out, _ = run(capsys, "--output-dir", str(tmp_path), "solve",
                       "--config", str(cfgpath))
    assert code == 0
    lines = (tmp_path / "diagnostics.csv").read_text().splitlines()
    rows = list(csv.DictReader(lines[1:]))
    assert rows[0]["t"] == "0"
    masses = [float(r["mass"]) for r in rows]
    assert masses[0] == pytest.approx(2.0 * math.pi, rel=1e-9)
    assert masses[-1] == pytest.approx(masses[0], rel=1e-9)
    assert (tmp_path / "snapshot.csv.gz").exists()


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["kernel", "eval", "--bogus", "1"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_unknown_initial_kind_exits_2(tmp_path, capsys):
    cfgpath = tmp_path / "cfg.json"
    cfgpath.write_text(json.dumps({"initial": {"kind": "vortex"},
                                   "grids": {"n_x": 4, "n_omega": 8,
                                             "n_s": 16, "n_h": 8,
                                             "s_max": 10.0}}))
    code, _, _ = run(capsys, "--output-dir", str(tmp_path), "solve",
                     "--config", str(cfgpath))
    assert code == 2
