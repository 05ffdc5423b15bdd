"""Configuration commands."""

from pathlib import Path

import click
from rich.console import Console

from qvi_lab.core.config_manager import SCENARIO_SCHEMA, batch_entries, load_scenario
from qvi_lab.core.errors import ConfigError
from qvi_lab.utils.output import print_error, print_json, print_key_value, print_success

console = Console()


@click.group()
def config():
    """
    Inspect and validate scenario configuration.

    Examples:
        qvi-lab config validate -c scenarios/pde_inverse.json
        qvi-lab config schema > scenario.schema.json
        qvi-lab config env
    """
    pass


@config.command()
@click.option(
    "--config",
    "-c",
    "config_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Scenario or batch file to validate",
)
@click.pass_context
def validate(ctx, config_path):
    """
    Validate a scenario file without computing anything.

    A batch file validates every scenario it lists. Exits with 2 on any error.

    Examples:
        qvi-lab config validate -c scenarios/interval.yaml
        qvi-lab config validate -c scenarios/batch.json
    """
    try:
        entries = batch_entries(config_path) or [config_path]
        errors_found = 0
        for path in entries:
            console.print(f"\n[bold]{path}:[/bold]")
            try:
                scenario = load_scenario(path)
            except ConfigError as e:
                for error in e.errors:
                    print_error(error)
                errors_found += len(e.errors)
            else:
                print_success(f"Scenario '{scenario.name}' is valid")

        if errors_found:
            console.print(f"\n[red]Found {errors_found} validation error(s)[/red]")
            ctx.exit(2)

    except ConfigError as e:
        print_error(str(e))
        ctx.exit(2)
    except click.exceptions.Exit:
        raise
    except Exception as e:
        print_error(f"Unexpected error: {str(e)}")
        if ctx.obj.get("verbose"):
            console.print_exception()
        ctx.exit(3)


@config.command()
def schema():
    """
    Print the JSON schema of scenario files.

    Examples:
        qvi-lab config schema
    """
    print_json(SCENARIO_SCHEMA)


@config.command()
@click.option("--json", "output_json", is_flag=True, help="Output as JSON")
@click.pass_context
def env(ctx, output_json):
    """
    Show the runtime settings read from .env.

    Examples:
        qvi-lab config env
        qvi-lab config env --json
    """
    settings = ctx.obj["settings"]
    if output_json:
        print_json(settings.to_dict())
        return
    for key, value in settings.to_dict().items():
        print_key_value(key, value)
    for error in settings.validate():
        print_error(error)
