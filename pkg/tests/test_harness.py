import json
import subprocess
import sys

import pytest

from spraywatch.harness import config, runner


def test_load_config_roundtrip(tmp_path):
    p = tmp_path / "exp.yaml"
    p.write_text(
        "experiment: calibration\n"
        "quick: true\n"
        "params:\n"
        "  spines: 8\n"
        "  seeds: 2\n")
    cfg = config.load_config(p)
    assert cfg["experiment"] == "calibration"
    assert cfg["quick"] is True
    assert cfg["params"] == {"spines": 8, "seeds": 2}


def test_load_config_rejects_unknown_keys(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("experiment: calibration\nspines: 8\n")
    with pytest.raises(ValueError, match="spines"):
        config.load_config(p)


def test_load_config_rejects_non_mapping(tmp_path):
    p = tmp_path / "list.yaml"
    p.write_text("- a\n- b\n")
    with pytest.raises(ValueError):
        config.load_config(p)


def test_parse_override_types():
    assert config.parse_override("seeds=5") == ("seeds", 5)
    assert config.parse_override("rate=0.01") == ("rate", 0.01)
    assert config.parse_override("quick=true") == ("quick", True)
    assert config.parse_override("label=run a") == ("label", "run a")
    assert config.parse_override("rates=[0.02, 0.01]") == ("rates", [0.02, 0.01])
    with pytest.raises(ValueError):
        config.parse_override("no-equals-sign")


def test_apply_overrides_routes_params():
    cfg = {"experiment": "calibration", "params": {"spines": 8}}
    config.apply_overrides(cfg, [("quick", True), ("seeds", 3)])
    assert cfg["quick"] is True
    # unknown top-level names land in params
    assert cfg["params"] == {"spines": 8, "seeds": 3}


def test_resolve_unknown_experiment():
    with pytest.raises(ValueError, match="unknown experiment"):
        runner.resolve("does-not-exist")


def test_accepted_params_filters_by_signature():
    def fn(seeds=2, spines=8):
        return None

    params = runner._accepted_params(fn, {"seeds": 5}, quick=True)
    # fn takes no quick argument, so none is injected
    assert params == {"seeds": 5}
    with pytest.raises(ValueError, match="spine_count"):
        runner._accepted_params(fn, {"spine_count": 4}, quick=False)


def test_write_result_scalar_rows_to_csv(tmp_path):
    result = {
        "name": "demo",
        "config": {"seeds": 1},
        "results": {
            "cells": [
                {"seed": 0, "ok": True, "score": 1.5},
                {"seed": 1, "ok": False, "score": 0.5, "note": "x"},
            ],
        },
        "checks": [{"name": "c", "pass": True, "detail": ""}],
        "runtime_s": 0.1,
        "ok": True,
    }
    written = runner.write_result(result, tmp_path)
    names = {p.name for p in map(__import__("pathlib").Path, written)}
    assert "demo.json" in names
    assert "demo_cells.csv" in names
    csv_path = tmp_path / "demo_cells.csv"
    header = csv_path.read_text().splitlines()[0]
    # first-row field order wins, extras appended
    assert header == "seed,ok,score,note"
    blob = json.loads((tmp_path / "demo.json").read_text())
    assert blob["ok"] is True


def test_write_result_nested_rows_to_jsonl(tmp_path):
    result = {
        "name": "demo2",
        "config": {},
        "results": {
            "rows": [{"seed": 0, "flagged": [3, 5]}],
        },
        "checks": [],
        "runtime_s": 0.0,
        "ok": True,
    }
    written = runner.write_result(result, tmp_path)
    jl = tmp_path / "demo2_rows.jsonl"
    assert str(jl) in written
    assert json.loads(jl.read_text().splitlines()[0])["flagged"] == [3, 5]


def test_run_experiment_smoke(tmp_path):
    res = runner.run_experiment(
        "coverage", {"workload": "ring", "leaves": 4, "rounds": 4},
        out_dir=tmp_path, quick=True)
    assert res["ok"] is True
    assert res["written"]
    assert (tmp_path / "coverage.json").exists()


def _cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "spraywatch.harness.cli", *args],
        capture_output=True, text=True, timeout=300)


def test_cli_build_topology_summary():
    proc = _cli("build-topology", "--leaves", "2", "--spines", "4",
                "--disable", "up:L0:S1", "--drop", "down:S2:L1=0.05")
    assert proc.returncode == 0
    blob = json.loads(proc.stdout)
    assert blob["leaves"] == 2 and blob["spines"] == 4
    assert blob["links"] == 2 * 2 * 4 + 2 * 2
    assert "up:L0:S1" in blob["disabled_links"]
    assert blob["degraded_links"]["down:S2:L1"] == 0.05


def test_cli_run_reports_failure_exit(tmp_path):
    cfg = tmp_path / "cov.yaml"
    cfg.write_text(
        "experiment: coverage\n"
        "params:\n"
        "  workload: ring\n"
        "  leaves: 4\n"
        "  rounds: 4\n")
    proc = _cli("run", "--config", str(cfg), "--out", str(tmp_path))
    assert proc.returncode == 0, proc.stderr
    assert "[PASS]" in proc.stdout

    # an override that breaks coverage must flip the exit code
    proc = _cli("run", "--config", str(cfg), "--set", "rounds=1",
                "--out", str(tmp_path))
    assert proc.returncode == 1
    assert "[FAIL]" in proc.stdout


def test_cli_coverage_subcommand(tmp_path):
    proc = _cli("coverage", "--workload", "permutation", "--leaves", "6",
                "--rounds", "6", "--out", str(tmp_path))
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "coverage.json").exists()
