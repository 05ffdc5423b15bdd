"""Main CLI entry point."""

from pathlib import Path

import click

from qvi_lab.core.config_manager import RuntimeSettings
from qvi_lab.core.log_manager import configure_logging
from qvi_lab.utils.output import print_warning


@click.group()
@click.pass_context
@click.option("--verbose", "-v", is_flag=True, help="Verbose output (debug logs, tracebacks)")
def cli(ctx, verbose):
    """
    qvi-lab - quasi-variational inequalities of obstacle type.

    Solves QVIs, computes directional derivatives of the solution map and audits
    stationarity of QVI-constrained optimal control problems. Every command writes
    results.json, history.csv and report.json into its output directory.

    Examples:
        qvi-lab qvi-solve -c scenarios/pde_inverse.json       # Solve one scenario
        qvi-lab sensitivity -c scenarios/sensitivity_pde_inverse.json
        qvi-lab control -c scenarios/control_box.json --out runs/box
        qvi-lab multiplicity-demo -c scenarios/multiplicity_centers.json
        qvi-lab qvi-solve -c scenarios/batch.json --jobs 4    # Run a batch
        qvi-lab config validate -c scenarios/control_box.json
    """
    settings = RuntimeSettings.from_env(Path(".env"))
    for error in settings.validate():
        print_warning(error)
    configure_logging(settings.log_level, verbose)

    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose
    ctx.obj["settings"] = settings


# Import command groups
from qvi_lab.commands.config import config
from qvi_lab.commands.run import control, multiplicity_demo, qvi_solve, sensitivity

cli.add_command(qvi_solve)
cli.add_command(sensitivity)
cli.add_command(control)
cli.add_command(multiplicity_demo)
cli.add_command(config)


if __name__ == "__main__":
    cli()
