"""Logging setup for the CLI."""

import logging

from rich.console import Console
from rich.logging import RichHandler

LOG_FORMAT = "%(name)s: %(message)s"


def configure_logging(level: str = "WARNING", verbose: bool = False) -> None:
    """
    Route library logs to stderr through rich.

    Args:
        level: Level name from the environment settings
        verbose: Force DEBUG and show rich tracebacks
    """
    effective = logging.DEBUG if verbose else getattr(logging, level.upper(), logging.WARNING)
    handler = RichHandler(
        console=Console(stderr=True),
        show_path=False,
        show_time=verbose,
        rich_tracebacks=verbose,
    )
    handler.setFormatter(logging.Formatter(LOG_FORMAT))

    root = logging.getLogger("qvi_lab")
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(effective)
    root.propagate = False
