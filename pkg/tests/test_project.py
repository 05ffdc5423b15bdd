import json
from pathlib import Path

import numpy as np

from qvi_lab.core.batch_runner import Overrides, RunStatus, apply_overrides, batch_exit_code
from qvi_lab.core.config_manager import ScenarioConfig
from qvi_lab.core.project import RunPaths, resolve_output_dir, to_plain, write_csv, write_json


def test_resolve_output_dir_precedence():
    assert resolve_output_dir("cli", "cfg", "runs", "s") == Path("cli")
    assert resolve_output_dir(None, "cfg", "runs", "s") == Path("cfg")
    assert resolve_output_dir(None, None, "runs", "s") == Path("runs") / "s"


def test_to_plain_handles_numpy_and_non_finite():
    data = {"a": np.array([1.0, np.inf]), "b": np.int64(3), "c": np.bool_(True), 4: (np.nan,)}
    assert to_plain(data) == {"a": [1.0, "inf"], "b": 3, "c": True, "4": ["nan"]}


def test_writers_are_deterministic(tmp_path):
    paths = RunPaths(tmp_path / "run").ensure()
    write_json(paths.results, {"z": 1.0, "a": [0.1, -np.inf]})
    assert json.loads(paths.results.read_text(encoding="utf-8")) == {"a": [0.1, "-inf"], "z": 1.0}
    assert paths.results.read_text(encoding="utf-8").index('"a"') < paths.results.read_text(encoding="utf-8").index('"z"')

    write_csv(paths.history, ["rho", "ratio"], [{"rho": 0.1, "ratio": None}, {"rho": np.float64(1e-3)}])
    assert paths.history.read_text(encoding="utf-8") == "rho,ratio\n0.1,\n0.001,\n"


def test_apply_overrides_targets_the_command_tolerance():
    config = ScenarioConfig.from_dict(
        {"obstacle": {"kind": "constant", "profile": 1.0}, "control": {"y_d": 0.5}}
    )
    solved = apply_overrides(config, "qvi-solve", Overrides(seed=9, tol=1e-7))
    assert solved.seed == 9 and solved.qvi.tol == 1e-7 and solved.control.tol == config.control.tol
    controlled = apply_overrides(config, "control", Overrides(tol=1e-7))
    assert controlled.control.tol == 1e-7 and controlled.qvi.tol == config.qvi.tol


def test_run_status_and_batch_code():
    statuses = [RunStatus("a", "qvi-solve", 0, "ok", None), RunStatus("b", "qvi-solve", 3, "boom", None)]
    assert statuses[0].status_color == "green"
    assert statuses[1].status_str == "numerical failure (exit 3)"
    assert batch_exit_code(statuses) == 3
    assert batch_exit_code([]) == 0
