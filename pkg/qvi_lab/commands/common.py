"""Shared plumbing of the scenario commands."""

import json
from pathlib import Path

import click
from rich.console import Console

from qvi_lab.core.batch_runner import (
    Overrides,
    RunStatus,
    batch_exit_code,
    run_batch,
    run_scenario_file,
)
from qvi_lab.core.config_manager import batch_entries
from qvi_lab.core.errors import QviLabError
from qvi_lab.core.project import RunPaths, resolve_output_dir, write_json
from qvi_lab.utils.output import print_checks, print_error, print_json, print_success, print_table, print_warning

console = Console()


def scenario_options(func):
    """Options shared by every scenario command."""
    options = [
        click.option(
            "--config",
            "-c",
            "config_path",
            required=True,
            type=click.Path(dir_okay=False, path_type=Path),
            help="Scenario file (JSON or YAML), or a batch file",
        ),
        click.option("--out", "-o", type=click.Path(file_okay=False), help="Output directory"),
        click.option("--seed", type=click.IntRange(min=0), help="Override the scenario seed"),
        click.option("--jobs", "-j", type=click.IntRange(min=1), default=1, show_default=True, help="Worker count"),
        click.option("--tol", type=click.FloatRange(min=0, min_open=True), help="Override the solver tolerance"),
        click.option("--json", "output_json", is_flag=True, help="Print the report as JSON"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _print_status(status: RunStatus, output_json: bool) -> None:
    report_path = RunPaths(status.output_dir).report if status.output_dir else None
    if status.exit_code in (0, 1) and report_path is not None and report_path.exists():
        report = json.loads(report_path.read_text(encoding="utf-8"))
        if output_json:
            print_json(report)
            return
        print_checks(report)
    if output_json:
        print_json({"scenario": status.scenario, "exit_code": status.exit_code, "message": status.message})
    elif status.exit_code == 0:
        print_success(f"{status.scenario}: {status.message} ({status.output_dir})")
    elif status.exit_code == 1:
        print_warning(f"{status.scenario}: {status.message} ({status.output_dir})")
    else:
        print_error(f"{status.scenario}: {status.message}")
        error_path = RunPaths(status.output_dir).error if status.output_dir else None
        if error_path is not None and error_path.exists():
            for line in json.loads(error_path.read_text(encoding="utf-8")).get("errors", []):
                print_error(f"  {line}")


def _print_batch(statuses: list[RunStatus], output_json: bool) -> None:
    if output_json:
        print_json(
            [
                {"scenario": s.scenario, "exit_code": s.exit_code, "message": s.message, "output_dir": str(s.output_dir)}
                for s in statuses
            ]
        )
        return
    rows = [
        {
            "Scenario": s.scenario,
            "Status": (s.status_str, s.status_color),
            "Output": str(s.output_dir or "-"),
            "Message": s.message,
        }
        for s in statuses
    ]
    print_table(rows, title="Batch")


def execute(ctx, command: str, config_path: Path, out, seed, jobs, tol, output_json) -> None:
    """
    Run a scenario command (single file or batch) and exit with its code.

    Exit codes: 0 passed, 1 invariant failed, 2 bad input, 3 numerical failure.
    """
    settings = ctx.obj["settings"]
    overrides = Overrides(out=out, seed=seed, tol=tol, jobs=jobs, default_root=settings.output_dir)
    try:
        entries = batch_entries(config_path)
        if entries is None:
            status = run_scenario_file(command, config_path, overrides)
            _print_status(status, output_json)
            ctx.exit(status.exit_code)
        statuses = run_batch(command, entries, overrides)
        _print_batch(statuses, output_json)
        ctx.exit(batch_exit_code(statuses))

    except QviLabError as e:
        print_error(str(e))
        for line in getattr(e, "errors", None) or []:
            if line != str(e):
                print_error(f"  {line}")
        paths = RunPaths(resolve_output_dir(out, None, settings.output_dir, config_path.stem)).ensure()
        write_json(paths.error, {"error": type(e).__name__, "message": str(e), "exit_code": e.exit_code})
        ctx.exit(e.exit_code)
    except click.exceptions.Exit:
        raise
    except Exception as e:
        print_error(f"Unexpected error: {str(e)}")
        if ctx.obj.get("verbose"):
            console.print_exception()
        ctx.exit(3)
