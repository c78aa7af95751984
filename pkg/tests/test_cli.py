import csv
import json
import math
import subprocess
import sys

import pytest

from sectorflow import __version__
from sectorflow.cli import ALLOWED_KEYS, run_command


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_unknown_flag_subcommand_and_missing_command(capsys):
    assert run_command(["opnorm", "--bogus"]) == 1
    assert "usage:" in capsys.readouterr().err
    assert run_command(["frobnicate"]) == 1
    assert run_command([]) == 1
    assert run_command(["solve", "--n", "abc"]) == 1


def test_help_lists_csv_columns(capsys):
    assert run_command(["--help"]) == 0
    out = capsys.readouterr().out
    assert "CSV columns" in out and "estimate_over_p" in out
    for name in ("solve", "hessian-growth", "strip", "weights", "opnorm", "simulate", "verify-all"):
        assert name in out


def test_opnorm_rows_and_reproducible(tmp_path):
    argv = ["opnorm", "--delta", "0.5", "--p", "4,8,16,32", "--seed", "7"]
    assert run_command(argv + ["--out", str(tmp_path / "a")]) == 0
    assert run_command(argv + ["--out", str(tmp_path / "b"), "--workers", "3"]) == 0
    a, b = tmp_path / "a" / "opnorm.csv", tmp_path / "b" / "opnorm.csv"
    table = rows(a)
    assert table[0] == ["p", "delta", "estimate", "estimate_over_p"] and len(table) == 5
    assert a.read_bytes() == b.read_bytes()
    meta = json.loads((tmp_path / "a" / "opnorm.json").read_text())
    assert meta["seed"] == 7 and meta["n"] == 64


def test_opnorm_several_deltas(tmp_path):
    assert run_command(["opnorm", "--delta", "0.25,0.5", "--p", "4", "--trials", "1", "--n", "16",
                        "--out", str(tmp_path)]) == 0
    assert (tmp_path / "opnorm_delta0.25.csv").exists() and (tmp_path / "opnorm_delta0.5.csv").exists()


def test_config_merge_and_validation(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"p": 4, "delta": [0.5], "trials": 1, "n": 8, "seed": 1}))
    assert run_command(["opnorm", "--config", str(cfg), "--n", "16", "--out", str(tmp_path / "o")]) == 0
    meta = json.loads((tmp_path / "o" / "opnorm.json").read_text())
    assert meta["n"] == 16 and meta["seed"] == 1 and len(meta["rows"]) == 1
    cfg.write_text(json.dumps({"p": [4], "colour": "red"}))
    assert run_command(["opnorm", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    cfg.write_text("[1, 2]")
    assert run_command(["opnorm", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert run_command(["opnorm", "--config", str(tmp_path / "missing.json")]) == 1
    assert run_command(["opnorm", "--trials", "0", "--out", str(tmp_path / "o")]) == 1
    assert {"alpha", "dt", "gammas"} <= ALLOWED_KEYS


def test_env_output_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("SECTORFLOW_OUT", str(tmp_path / "env"))
    assert run_command(["weights", "--p", "2", "--delta", "0.5", "--fast"]) == 0
    assert rows(tmp_path / "env" / "weights.csv")[0] == ["delta", "p", "sampled", "envelope", "dual_sampled"]


def test_solve(tmp_path):
    assert run_command(["solve", "--n", "32", "--alpha", str(2 * math.pi / 3), "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "solve.json").read_text())
    assert meta["rel_l2_error"] < 5e-2 and meta["version"] == __version__
    assert len(rows(tmp_path / "solve.csv")) == 1 + 32 * 32


def test_hessian_growth_and_strip(tmp_path):
    assert run_command(["hessian-growth", "--n", "16", "--trials", "2", "--p", "4,8", "--out", str(tmp_path)]) == 0
    assert rows(tmp_path / "hessian_growth.csv")[0] == ["p", "r", "r_over_p"]
    assert json.loads((tmp_path / "hessian_growth.json").read_text())["seed"] == 3
    assert run_command(["strip", "--p", "4", "--n", "256", "--fast", "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "strip_profile.csv")
    assert table[0] == ["p", "xi", "K", "ML", "dML"] and len(table) == 1 + 161
    assert run_command(["strip", "--alpha", str(math.pi / 2), "--p", "8", "--out", str(tmp_path)]) == 1


def test_simulate_and_guard(tmp_path, capsys):
    assert run_command(["simulate", "--n", "16", "--fast", "--out", str(tmp_path / "s")]) == 0
    assert "circulation=" in capsys.readouterr().out
    assert (tmp_path / "s" / "diagnostics.csv").exists()
    cfg = tmp_path / "sim.json"
    cfg.write_text(json.dumps({"dt": 10.0, "steps": 1}))
    assert run_command(["simulate", "--config", str(cfg), "--n", "16", "--out", str(tmp_path / "g")]) == 2
    cfg.write_text(json.dumps({"patch_kind": "point", "points": [[0.3, 0.4]], "gammas": [1.0], "steps": 2}))
    assert run_command(["simulate", "--config", str(cfg), "--out", str(tmp_path / "p")]) == 0


def test_console_script_entry_point():
    done = subprocess.run([sys.executable, "-m", "sectorflow.cli", "bogus"], capture_output=True, text=True)
    assert done.returncode == 1 and "usage:" in done.stderr
