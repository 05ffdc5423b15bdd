"""End-to-end runs of the qvi-lab commands through click's test runner."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from qvi_lab.main import cli

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

SMALL = {
    "name": "small",
    "grid": {"dim": 1, "n_per_axis": 10},
    "obstacle": {"kind": "pde_inverse", "offset": 0.05, "scale": 0.005},
    "source": 10.0,
}


@pytest.fixture
def runner(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(cli, [str(a) for a in args], catch_exceptions=False)


def read_json(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


def test_qvi_solve_writes_artifacts(runner, tmp_path):
    result = invoke(runner, "qvi-solve", "-c", SCENARIO_DIR / "pde_inverse.json", "--out", tmp_path / "a")
    assert result.exit_code == 0, result.output
    for name in ("results.json", "history.csv", "report.json"):
        assert (tmp_path / "a" / name).exists()
    report = read_json(tmp_path / "a" / "report.json")
    assert report["passed"] is True
    assert report["command"] == "qvi-solve"
    assert report["constants"]["is_t_monotone"] is True
    assert (tmp_path / "a" / "history.csv").read_text(encoding="utf-8").startswith("iteration,step_norm,ratio\n")


def test_runs_are_byte_identical(runner, tmp_path):
    for out in ("first", "second"):
        assert invoke(runner, "qvi-solve", "-c", SCENARIO_DIR / "penalty.json", "--out", tmp_path / out).exit_code == 0
    for name in ("results.json", "history.csv", "report.json"):
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()


def test_default_output_dir_and_overrides(runner, tmp_path, write_scenario):
    path = write_scenario(SMALL)
    result = invoke(runner, "qvi-solve", "-c", path, "--seed", 5, "--tol", 1e-11, "--json")
    assert result.exit_code == 0, result.output
    report = read_json(tmp_path / "runs" / "small" / "report.json")
    assert report["seed"] == 5
    assert json.loads(result.stdout) == report


def test_config_error_exits_2(runner, tmp_path, write_scenario):
    path = write_scenario({**SMALL, "grid": {"dim": 1, "n_per_axis": 10, "spacing": 0.1}})
    result = invoke(runner, "qvi-solve", "-c", path, "--out", tmp_path / "bad")
    assert result.exit_code == 2
    error = read_json(tmp_path / "bad" / "error.json")
    assert error["exit_code"] == 2
    assert "grid: unknown key 'spacing'" in error["errors"]
    assert not (tmp_path / "bad" / "report.json").exists()


def test_missing_config_file_exits_2(runner, tmp_path):
    result = invoke(runner, "qvi-solve", "-c", tmp_path / "missing.json", "--out", tmp_path / "missing")
    assert result.exit_code == 2
    assert read_json(tmp_path / "missing" / "error.json")["error"] == "ConfigError"


def test_solver_failure_exits_3(runner, tmp_path, write_scenario):
    path = write_scenario({**SMALL, "qvi": {"tol": 1e-14, "max_iter": 1}})
    result = invoke(runner, "qvi-solve", "-c", path, "--out", tmp_path / "cap")
    assert result.exit_code == 3
    assert read_json(tmp_path / "cap" / "error.json")["error"] == "ConvergenceError"


def test_violated_hypothesis_exits_1(runner, tmp_path, write_scenario):
    path = write_scenario({**SMALL, "qvi": {"route": "interval", "upper_source": 5.0}})
    result = invoke(runner, "qvi-solve", "-c", path, "--out", tmp_path / "hyp")
    assert result.exit_code == 1
    assert read_json(tmp_path / "hyp" / "error.json")["error"] == "InvariantError"


def test_success_clears_stale_error(runner, tmp_path, write_scenario):
    out = tmp_path / "stale"
    out.mkdir()
    (out / "error.json").write_text("{}", encoding="utf-8")
    assert invoke(runner, "qvi-solve", "-c", write_scenario(SMALL), "--out", out).exit_code == 0
    assert not (out / "error.json").exists()


def test_batch_runs_in_parallel(runner, tmp_path, write_scenario):
    write_scenario(SMALL, "one.json")
    write_scenario({**SMALL, "name": "two", "qvi": {"route": "penalty"}}, "two.json")
    batch = write_scenario({"batch": ["one.json", "two.json"]}, "batch.json")
    result = invoke(runner, "qvi-solve", "-c", batch, "--jobs", 2, "--out", tmp_path / "batch")
    assert result.exit_code == 0, result.output
    assert read_json(tmp_path / "batch" / "small" / "report.json")["passed"]
    assert read_json(tmp_path / "batch" / "two" / "report.json")["passed"]


def test_batch_exit_code_is_worst(runner, tmp_path, write_scenario):
    write_scenario(SMALL, "good.json")
    write_scenario({**SMALL, "name": "bad", "seed": -1}, "bad.json")
    batch = write_scenario({"batch": ["good.json", "bad.json"]}, "batch.json")
    result = invoke(runner, "qvi-solve", "-c", batch, "--out", tmp_path / "mixed", "--json")
    assert result.exit_code == 2
    statuses = json.loads(result.stdout)
    assert [s["exit_code"] for s in statuses] == [0, 2]


@pytest.mark.parametrize(
    "command, scenario",
    [
        ("qvi-solve", "interval.yaml"),
        ("qvi-solve", "advection_2d.json"),
        ("sensitivity", "sensitivity_pde_inverse.json"),
        ("control", "control_unbounded.json"),
        ("multiplicity-demo", "multiplicity_centers.json"),
        ("multiplicity-demo", "multiplicity_targets.json"),
    ],
)
def test_shipped_scenarios_pass(runner, tmp_path, command, scenario):
    result = invoke(runner, command, "-c", SCENARIO_DIR / scenario, "--out", tmp_path / "out")
    report = read_json(tmp_path / "out" / "report.json")
    failed = [name for name, check in report["checks"].items() if not check["passed"]]
    assert result.exit_code == 0, failed
    assert report["command"] == command


def test_sensitivity_asserts_outer_contraction(runner, tmp_path):
    result = invoke(runner, "sensitivity", "-c", SCENARIO_DIR / "sensitivity_pde_inverse.json", "--out", tmp_path / "s")
    assert result.exit_code == 0, result.output
    check = read_json(tmp_path / "s" / "report.json")["checks"]["outer_contraction_ratio"]
    assert check["passed"] is True
    assert check["value"] <= check["threshold"]
    assert "outer_contraction_ratio" not in read_json(tmp_path / "s" / "report.json")["observations"]


def test_command_needs_its_block(runner, tmp_path, write_scenario):
    result = invoke(runner, "control", "-c", write_scenario(SMALL), "--out", tmp_path / "nocontrol")
    assert result.exit_code == 2


def test_config_validate(runner, write_scenario):
    assert invoke(runner, "config", "validate", "-c", SCENARIO_DIR / "batch.json").exit_code == 0
    bad = write_scenario({**SMALL, "seed": "zero"})
    result = invoke(runner, "config", "validate", "-c", bad)
    assert result.exit_code == 2
    assert "seed must be a nonnegative integer" in result.output


def test_config_schema_and_env(runner):
    result = invoke(runner, "config", "schema")
    assert result.exit_code == 0
    assert json.loads(result.stdout)["title"] == "qvi-lab scenario"

    result = invoke(runner, "config", "env", "--json")
    assert json.loads(result.stdout) == {"QVI_LAB_LOG_LEVEL": "WARNING", "QVI_LAB_OUTPUT_DIR": "runs"}
