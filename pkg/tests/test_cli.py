import json
import os
import subprocess
import sys

import pytest

BASE = [sys.executable, "-m", "gesr.cli"]


def run_cli(*args, **kw):
    return subprocess.run(BASE + list(args), capture_output=True, text=True, **kw)


def read_tree(path):
    out = {}
    for root, _, files in os.walk(path):
        for f in sorted(files):
            p = os.path.join(root, f)
            with open(p, "rb") as fh:
                out[os.path.relpath(p, path)] = fh.read()
    return out


def test_run_is_byte_deterministic(tmp_path):
    args = ["run", "--task", "Nguyen-8", "--population", "40",
            "--generations", "4", "--seed", "9"]
    r1 = run_cli(*args, "--out", str(tmp_path / "a"))
    r2 = run_cli(*args, "--out", str(tmp_path / "b"))
    assert r1.returncode == 0 and r2.returncode == 0
    assert read_tree(tmp_path / "a") == read_tree(tmp_path / "b")


def test_run_artifacts_exist(tmp_path):
    r = run_cli("run", "--task", "Nguyen-8", "--population", "40",
                "--generations", "3", "--seed", "1", "--out", str(tmp_path))
    assert r.returncode == 0
    assert (tmp_path / "run_Nguyen-8_1.json").exists()
    assert (tmp_path / "run_Nguyen-8_1.csv").exists()
    assert (tmp_path / "run_Nguyen-8_1.sexpr").exists()
    rec = json.loads((tmp_path / "run_Nguyen-8_1.json").read_text())
    assert rec["task"] == "Nguyen-8"


def test_malformed_csv_exits_2(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,oops,y\n1,2,3\n2,3,4\n")
    r = run_cli("run", "--data", str(bad), "--out", str(tmp_path / "o"))
    assert r.returncode == 2
    assert "oops" in r.stderr


def test_unknown_task_exits_2(tmp_path):
    r = run_cli("run", "--task", "NoSuchTask", "--out", str(tmp_path))
    assert r.returncode == 2


def test_missing_config_exits_3(tmp_path):
    r = run_cli("--config", str(tmp_path / "nope.json"), "run", "--task", "Nguyen-1")
    assert r.returncode == 3


def test_env_seed_default(tmp_path):
    env = dict(os.environ, GESR_SEED="123")
    r = subprocess.run(BASE + ["run", "--task", "Nguyen-1", "--dump-config"],
                       capture_output=True, text=True, env=env)
    cfg = json.loads(r.stdout)
    assert cfg["seed"] == 123


def test_dump_config_roundtrip(tmp_path):
    r1 = run_cli("run", "--task", "Nguyen-1", "--population", "77", "--dump-config")
    cfg = json.loads(r1.stdout)
    assert cfg["population"] == 77
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(r1.stdout)
    r2 = run_cli("--config", str(cfg_path), "run", "--task", "Nguyen-1",
                 "--dump-config")
    assert json.loads(r2.stdout)["population"] == 77
    # explicit flags win over the config file
    r3 = run_cli("--config", str(cfg_path), "run", "--task", "Nguyen-1",
                 "--population", "11", "--dump-config")
    assert json.loads(r3.stdout)["population"] == 11


def test_efficiency_subcommand(tmp_path):
    r = run_cli("efficiency", "--alpha", "0.25", "--beta", "0.5", "--lam", "4",
                "--k", "2", "--trials", "20000", "--seed", "5",
                "--out", str(tmp_path))
    assert r.returncode == 0
    rep = json.loads((tmp_path / "efficiency.json").read_text())
    assert rep["p_improve"]["random"]["closed_form"] == 0.68359375


def test_collect_and_train_pipeline(tmp_path):
    out = tmp_path / "pairs"
    r = run_cli("collect-pairs", "--kind", "mutation", "--n", "120",
                "--seed", "2", "--out", str(out))
    assert r.returncode == 0, r.stderr
    pairs_file = out / "mutation_pairs.ndjson"
    assert pairs_file.exists()
    assert len(pairs_file.read_text().strip().splitlines()) == 120
    r2 = run_cli("train-editor", "--pairs", str(pairs_file),
                 "--out", str(tmp_path / "editor"))
    assert r2.returncode == 0, r2.stderr
    summary = json.loads((tmp_path / "editor" / "train_summary.json").read_text())
    assert summary["pairs"] == 120
    assert (tmp_path / "editor" / "editor.json").exists()


def test_dynsys_subcommand(tmp_path):
    r = run_cli("dynsys", "--system", "ShimizuMorioka", "--samples", "300",
                "--sample-every", "5", "--window", "21", "--noise", "0.02",
                "--seed", "3", "--out", str(tmp_path))
    assert r.returncode == 0, r.stderr
    rep = json.loads((tmp_path / "dynsys_ShimizuMorioka.json").read_text())
    assert set(rep) == {"name", "per_dim_r2", "r2_mean", "r2_roll_50"}
    assert len(rep["per_dim_r2"]) == 3
    assert (tmp_path / "dynsys_ShimizuMorioka_data.csv").exists()


def test_bench_subcommand(tmp_path):
    r = run_cli("bench", "--suite", "R", "--repeat", "1", "--population", "30",
                "--generations", "2", "--seed", "4", "--out", str(tmp_path))
    assert r.returncode == 0, r.stderr
    lines = (tmp_path / "bench_R.csv").read_text().strip().splitlines()
    assert lines[0].startswith("suite,task,mode,mean_r2")
    assert len(lines) == 4  # header + 3 R tasks
    assert (tmp_path / "registry.json").exists()
