"""Scenario commands: qvi-solve, sensitivity, control, multiplicity-demo."""

import click

from qvi_lab.commands.common import execute, scenario_options


@click.command("qvi-solve")
@scenario_options
@click.pass_context
def qvi_solve(ctx, config_path, out, seed, jobs, tol, output_json):
    """
    Solve the QVI of a scenario.

    The route comes from qvi.route: fixed-point iteration, the monotone interval
    method (minimal and maximal solution) or the penalty path.

    Examples:
        qvi-lab qvi-solve -c scenarios/pde_inverse.json
        qvi-lab qvi-solve -c scenarios/interval.yaml --out runs/interval
        qvi-lab qvi-solve -c scenarios/batch.json --jobs 4
    """
    execute(ctx, "qvi-solve", config_path, out, seed, jobs, tol, output_json)


@click.command()
@scenario_options
@click.pass_context
def sensitivity(ctx, config_path, out, seed, jobs, tol, output_json):
    """
    Directional derivative of the solution map with finite-difference validation.

    Examples:
        qvi-lab sensitivity -c scenarios/sensitivity_pde_inverse.json
        qvi-lab sensitivity -c scenarios/sensitivity_pde_inverse.json --seed 7 --json
    """
    execute(ctx, "sensitivity", config_path, out, seed, jobs, tol, output_json)


@click.command()
@scenario_options
@click.pass_context
def control(ctx, config_path, out, seed, jobs, tol, output_json):
    """
    Solve the control problem along the penalty path and audit stationarity.

    Weak C and E-almost C stationarity are asserted; C and strong stationarity are
    reported. Bouligand stationarity is asserted when the derivative certificate holds.

    Examples:
        qvi-lab control -c scenarios/control_unbounded.json
        qvi-lab control -c scenarios/control_box.json --jobs 4
    """
    execute(ctx, "control", config_path, out, seed, jobs, tol, output_json)


@click.command("multiplicity-demo")
@scenario_options
@click.pass_context
def multiplicity_demo(ctx, config_path, out, seed, jobs, tol, output_json):
    """
    Build a cutoff obstacle map with several known solutions and certify each one.

    Examples:
        qvi-lab multiplicity-demo -c scenarios/multiplicity_centers.json
        qvi-lab multiplicity-demo -c scenarios/multiplicity_targets.json
    """
    execute(ctx, "multiplicity-demo", config_path, out, seed, jobs, tol, output_json)
