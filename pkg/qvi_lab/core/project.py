"""Output directory layout and deterministic artifact writers."""

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np


class RunPaths:
    """Container for the artifact paths of one scenario run."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.results = self.root / "results.json"
        self.history = self.root / "history.csv"
        self.report = self.root / "report.json"
        self.error = self.root / "error.json"

    def ensure(self) -> "RunPaths":
        self.root.mkdir(parents=True, exist_ok=True)
        return self


def resolve_output_dir(
    cli_out: Optional[str], config_out: Optional[str], default_root: str, scenario: str
) -> Path:
    """
    Pick the output directory: --out, then the config's output_dir, then <default_root>/<scenario>.
    """
    if cli_out:
        return Path(cli_out)
    if config_out:
        return Path(config_out)
    return Path(default_root) / scenario


def to_plain(value: Any) -> Any:
    """Convert numpy values to JSON-ready Python values; non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def write_json(path: Path, data: Any) -> None:
    text = json.dumps(to_plain(data), indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_csv(path: Path, header: list[str], rows: Iterable[dict]) -> None:
    """Write rows with a fixed header; floats use repr, so '.' is always the decimal separator."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(row.get(name, "")) for name in header])


def _cell(value: Any) -> str:
    plain = to_plain(value)
    if isinstance(plain, float):
        return repr(plain)
    if plain is None:
        return ""
    return str(plain)
