"""Run one scenario file, or many in parallel worker processes."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional

from qvi_lab.core.config_manager import ScenarioConfig, load_scenario
from qvi_lab.core.errors import QviLabError
from qvi_lab.core.project import RunPaths, resolve_output_dir, write_json
from qvi_lab.core.scenarios import RUNNERS, write_outcome

logger = logging.getLogger(__name__)

EXIT_MESSAGES = {0: "passed", 1: "invariant failed", 2: "bad input", 3: "numerical failure"}


@dataclass(frozen=True)
class Overrides:
    """Command-line values that take precedence over the scenario file."""

    out: Optional[str] = None
    seed: Optional[int] = None
    tol: Optional[float] = None
    jobs: int = 1
    default_root: str = "runs"
    batch: bool = False


@dataclass
class RunStatus:
    """Outcome of one scenario run."""

    scenario: str
    command: str
    exit_code: int
    message: str
    output_dir: Optional[Path]

    @property
    def passed(self) -> bool:
        return self.exit_code == 0

    @property
    def status_str(self) -> str:
        """Human-readable status string."""
        label = EXIT_MESSAGES.get(self.exit_code, f"exit {self.exit_code}")
        return label if self.passed else f"{label} (exit {self.exit_code})"

    @property
    def status_color(self) -> str:
        """Color for rich output."""
        if self.exit_code == 0:
            return "green"
        elif self.exit_code == 1:
            return "yellow"
        else:
            return "red"


def apply_overrides(config: ScenarioConfig, command: str, overrides: Overrides) -> ScenarioConfig:
    if overrides.seed is not None:
        config = replace(config, seed=overrides.seed)
    if overrides.tol is not None:
        if command == "control" and config.control is not None:
            config = replace(config, control=replace(config.control, tol=overrides.tol))
        else:
            config = replace(config, qvi=replace(config.qvi, tol=overrides.tol))
    return config


def _output_dir(overrides: Overrides, config_out: Optional[str], scenario: str) -> Path:
    if overrides.batch and overrides.out:
        return Path(overrides.out) / scenario
    return resolve_output_dir(overrides.out, config_out, overrides.default_root, scenario)


def run_scenario_file(command: str, path: Path, overrides: Overrides) -> RunStatus:
    """
    Load, run and write the artifacts of one scenario.

    Failures never raise: they end up in error.json and the returned exit code.
    """
    path = Path(path)
    scenario = path.stem
    paths = RunPaths(_output_dir(overrides, None, scenario))
    try:
        config = apply_overrides(load_scenario(path), command, overrides)
        scenario = config.name
        paths = RunPaths(_output_dir(overrides, config.output_dir, scenario))
        logger.info(f"Running {command} on '{scenario}' into {paths.root}")
        outcome = RUNNERS[command](config, overrides.jobs)
        write_outcome(paths, outcome)
        message = "all checks passed" if outcome.passed else _failed_checks(outcome.report)
        return RunStatus(scenario, command, outcome.exit_code, message, paths.root)
    except QviLabError as e:
        logger.error(f"{scenario}: {e}")
        _write_error(paths, e.exit_code, type(e).__name__, str(e), getattr(e, "errors", None))
        return RunStatus(scenario, command, e.exit_code, str(e), paths.root)
    except Exception as e:
        logger.exception(f"{scenario}: unexpected error")
        _write_error(paths, 3, type(e).__name__, str(e), None)
        return RunStatus(scenario, command, 3, f"Unexpected error: {e}", paths.root)


def _failed_checks(report: dict) -> str:
    failed = sorted(name for name, check in report["checks"].items() if not check["passed"])
    return "failed: " + ", ".join(failed)


def _write_error(paths: RunPaths, exit_code: int, kind: str, message: str, errors: Optional[List[str]]) -> None:
    payload = {"exit_code": exit_code, "error": kind, "message": message}
    if errors:
        payload["errors"] = list(errors)
    try:
        write_json(paths.ensure().error, payload)
    except OSError as e:
        logger.error(f"Could not write {paths.error}: {e}")


def run_batch(command: str, scenario_paths: List[Path], overrides: Overrides) -> List[RunStatus]:
    """
    Run independent scenarios, in worker processes when jobs > 1.

    Results come back in input order whatever the completion order.
    """
    overrides = replace(overrides, batch=True)
    if overrides.jobs <= 1 or len(scenario_paths) <= 1:
        return [run_scenario_file(command, p, overrides) for p in scenario_paths]

    inner = replace(overrides, jobs=1)
    with ProcessPoolExecutor(max_workers=overrides.jobs) as pool:
        futures = [pool.submit(run_scenario_file, command, p, inner) for p in scenario_paths]
        return [future.result() for future in futures]


def batch_exit_code(statuses: List[RunStatus]) -> int:
    """Worst exit code of a batch (3 > 2 > 1 > 0)."""
    return max((s.exit_code for s in statuses), default=0)
