"""Command-line front end: exit codes, artifacts, and manifests."""

import json
import os

import numpy as np
import pytest

from gqfwp.cli import (
    EXIT_DATA,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_USAGE,
    main,
)
from gqfwp.datasets import load_series_csv, load_silso


def run(tmp_path, *argv):
    cwd = os.getcwd()
    os.chdir(tmp_path)
    try:
        return main(list(argv))
    finally:
        os.chdir(cwd)


def test_usage_errors(tmp_path, capsys):
    assert run(tmp_path) == EXIT_USAGE  # no subcommand
    assert run(tmp_path, "frobnicate") == EXIT_USAGE
    assert run(tmp_path, "train") == EXIT_USAGE  # missing --data
    rc = run(tmp_path, "gen", "no-such-series")
    assert rc == EXIT_USAGE
    err = capsys.readouterr().err
    assert "valid names" in err and "narma5" in err


def test_gen_writes_series_and_manifest(tmp_path):
    assert run(tmp_path, "gen", "narma5", "--out", "n5.csv") == EXIT_OK
    s = load_series_csv(tmp_path / "n5.csv")
    assert len(s) == 300
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "gen"
    assert man["outputs"] == ["n5.csv"]
    assert man["seed"] == 0
    assert run(tmp_path, "gen", "shm", "--out", "shm.csv") == EXIT_OK
    assert load_series_csv(tmp_path / "shm.csv").v[0] == 3.0


def test_gen_sunspots_uses_monthly_format(tmp_path):
    assert run(tmp_path, "gen", "sunspots-synthetic", "--out", "sun.txt") == EXIT_OK
    s = load_silso(tmp_path / "sun.txt")
    assert len(s) == 3326


def test_train_eval_forecast_pipeline(tmp_path):
    assert run(tmp_path, "gen", "shm", "--out", "shm.csv") == EXIT_OK
    rc = run(tmp_path, "train", "--data", "shm.csv", "--variant", "g-fwp",
             "-N", "6", "--epochs", "1", "--out-dir", "run")
    assert rc == EXIT_OK
    ckpt = tmp_path / "run" / "checkpoint.json"
    assert ckpt.exists()
    assert (tmp_path / "run" / "loss_curve.csv").exists()
    man = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert man["config"]["variant"] == "g-fwp"

    rc = run(tmp_path, "eval", "--checkpoint", "run/checkpoint.json",
             "--data", "shm.csv", "--export-trajectory", "--out-dir", "ev")
    assert rc == EXIT_OK
    metrics = json.loads((tmp_path / "ev" / "metrics.json").read_text())
    assert set(metrics) >= {"scaled_mse", "pae", "pte", "n_windows"}
    traj = (tmp_path / "ev" / "trajectory.csv").read_text().splitlines()
    assert traj[0].startswith("# beta:")
    betas = json.loads(traj[0][len("# beta:") :])
    assert abs(sum(betas) - 1.0) < 1e-9
    assert traj[1] == "t,gate,w_inf_norm,delta_inf_norm"

    rc = run(tmp_path, "forecast", "--checkpoint", "run/checkpoint.json",
             "--data", "shm.csv", "--out", "fc.csv")
    assert rc == EXIT_OK
    lines = (tmp_path / "fc.csv").read_text().splitlines()
    assert lines[0] == "month_ahead,value" and len(lines) == 2


def test_variant_aliases_resolve(tmp_path):
    assert run(tmp_path, "gen", "narma5", "--out", "n5.csv") == EXIT_OK
    rc = run(tmp_path, "train", "--data", "n5.csv", "--variant", "fwp-ungated",
             "-N", "4", "--epochs", "1", "--out-dir", "run")
    assert rc == EXIT_OK
    doc = json.loads((tmp_path / "run" / "checkpoint.json").read_text())
    assert doc["variant"] == "fwp"


def test_config_file_precedence(tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps(
        {"variant": "fwp", "window": 4, "epochs": 1, "slow_hidden": 6}))
    assert run(tmp_path, "gen", "narma5", "--out", "n5.csv") == EXIT_OK
    rc = run(tmp_path, "--config", "cfg.json", "train", "--data", "n5.csv",
             "--out-dir", "run")
    assert rc == EXIT_OK
    man = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert man["config"]["window"] == 4
    assert man["config"]["dims"]["slow_hidden"] == 6
    # the flag wins over the file
    rc = run(tmp_path, "--config", "cfg.json", "train", "--data", "n5.csv",
             "-N", "5", "--out-dir", "run2")
    assert rc == EXIT_OK
    man = json.loads((tmp_path / "run2" / "manifest.json").read_text())
    assert man["config"]["window"] == 5


def test_data_errors(tmp_path, capsys):
    assert run(tmp_path, "train", "--data", "missing.csv") == EXIT_DATA
    assert "not found" in capsys.readouterr().err
    (tmp_path / "short.csv").write_text("t,value\n0.0,1.0\n1.0,2.0\n")
    rc = run(tmp_path, "train", "--data", "short.csv", "-N", "16",
             "--epochs", "1")
    assert rc == EXIT_DATA
    assert run(tmp_path, "eval", "--checkpoint", "nope.json",
               "--data", "short.csv") == EXIT_DATA
    (tmp_path / "garbage.json").write_text("{}")
    assert run(tmp_path, "eval", "--checkpoint", "garbage.json",
               "--data", "short.csv") == EXIT_DATA


def test_numeric_failure_exit_code(tmp_path, capsys):
    assert run(tmp_path, "gen", "shm", "--out", "shm.csv") == EXIT_OK
    # absurd learning rate blows past the divergence guard
    rc = run(tmp_path, "train", "--data", "shm.csv", "--variant", "fwp",
             "-N", "6", "--epochs", "3", "--lr", "1e9")
    assert rc == EXIT_NUMERIC
    assert "numerical failure" in capsys.readouterr().err


def test_scan_bench_output(tmp_path):
    rc = run(tmp_path, "scan-bench", "--T", "512", "--p", "2,4",
             "--out", "bench.csv")
    assert rc == EXIT_OK
    lines = (tmp_path / "bench.csv").read_text().splitlines()
    assert lines[0] == "T,p,mode,wall_ns,compose_count"
    assert len(lines) == 4  # sequential + two parallel rows


def test_gen_seed_flag_changes_synthetic_series(tmp_path):
    assert run(tmp_path, "--seed", "1", "gen", "sunspots-synthetic",
               "--out", "a.txt") == EXIT_OK
    assert run(tmp_path, "--seed", "2", "gen", "sunspots-synthetic",
               "--out", "b.txt") == EXIT_OK
    a = load_silso(tmp_path / "a.txt").v
    b = load_silso(tmp_path / "b.txt").v
    assert not np.array_equal(a, b)
