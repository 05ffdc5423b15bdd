"""Output formatting utilities."""

import json
from typing import Any, Dict, List

from rich.console import Console
from rich.table import Table

from qvi_lab.core.project import to_plain

console = Console()
err_console = Console(stderr=True)


def format_table(
    data: List[Dict[str, Any]], title: str = "", columns: List[tuple[str, str]] = None
) -> Table:
    """
    Format data as a rich table.

    Args:
        data: List of dictionaries containing row data
        title: Optional table title
        columns: List of (column_name, style) tuples. If None, uses data keys.

    Returns:
        Rich Table object
    """
    table = Table(title=title, show_header=True, header_style="bold cyan")

    if not data:
        return table

    if columns is None:
        columns = [(key, "") for key in data[0].keys()]

    for col_name, style in columns:
        table.add_column(col_name, style=style)

    for row in data:
        values = []
        for col_name, _ in columns:
            value = row.get(col_name, "")
            # (value, color) tuple
            if isinstance(value, tuple):
                text, color = value
                values.append(f"[{color}]{text}[/{color}]")
            elif isinstance(value, float):
                values.append(f"{value:.3e}")
            else:
                values.append(str(value))
        table.add_row(*values)

    return table


def print_table(
    data: List[Dict[str, Any]], title: str = "", columns: List[tuple[str, str]] = None
):
    table = format_table(data, title, columns)
    console.print(table)


def print_json(data: Any):
    """Print data as sorted, indented JSON (numpy values converted)."""
    print(json.dumps(to_plain(data), indent=2, sort_keys=True))


def print_checks(report: Dict[str, Any]):
    """
    Print the asserted checks of a run report as a table.

    Args:
        report: report.json content with a 'checks' mapping of value/threshold/passed
    """
    rows = []
    for name, check in sorted(report.get("checks", {}).items()):
        ok = check["passed"]
        rows.append(
            {
                "Check": name,
                "Value": check["value"],
                "Threshold": check["threshold"],
                "Status": ("pass", "green") if ok else ("FAIL", "red"),
            }
        )
    print_table(rows, title=f"{report.get('command', '')}: {report.get('scenario', '')}")


def print_error(message: str):
    err_console.print(f"[red]Error:[/red] {message}")


def print_success(message: str):
    console.print(f"[green]✓[/green] {message}")


def print_warning(message: str):
    console.print(f"[yellow]⚠[/yellow] {message}")


def print_key_value(key: str, value: Any):
    console.print(f"[cyan]{key}:[/cyan] {value}")
