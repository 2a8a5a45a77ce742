"""Project data locations and the run-output directory resolution."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

PROJECT_ROOT = Path(__file__).resolve().parents[2]


def data_dir() -> Path:
    return PROJECT_ROOT / "data"


def runs_dir() -> Path:
    """Default parent for run outputs (CSV, SVG, JSON)."""
    return data_dir() / "runs"


def example_config_path() -> Path:
    return data_dir() / "scenario.json"


def resolve_output_dir(cli_value: Optional[str], config_value: Optional[str], command: str) -> Path:
    """CLI flag wins over the config file; otherwise data/runs/<command>."""
    if cli_value:
        return Path(cli_value)
    if config_value:
        return Path(config_value)
    return runs_dir() / command
