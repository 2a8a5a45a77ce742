"""CSV/JSON/NPZ writers for run outputs.

CSV files are truncated on open and use fixed float formatting so that a
rerun with the same config and seed reproduces them byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Sequence

import numpy as np

from dwbsim.errors import OutputError

POWER_SWEEP_HEADER = (
    "trial_id",
    "n_t",
    "n_c",
    "n_e",
    "snr_db",
    "dwb_power_w",
    "dwb_relaxed_power_w",
    "nulling_power_w",
    "errors",
    "seed",
)
SWEEP_SUMMARY_HEADER = (
    "n_t",
    "n_c",
    "n_e",
    "snr_db",
    "n_ok",
    "dwb_mean_w",
    "dwb_ci95_w",
    "dwb_relaxed_mean_w",
    "nulling_mean_w",
    "nulling_ci95_w",
    "saving_pct",
)
ARRAY_RESPONSE_HEADER = ("angle_deg", "magnitude_db", "scheme")
RANGE_DOPPLER_HEADER = ("range_m", "doppler_hz", "magnitude_db")
DECEPTION_TRIALS_HEADER = (
    "trial_id",
    "n_t",
    "true_range_m",
    "true_doppler_hz",
    "fake_range_m",
    "fake_doppler_hz",
    "est_range_m",
    "est_doppler_hz",
    "deception_range_err_m",
    "deception_doppler_err_hz",
    "seed",
)


def format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return "%.12g" % value
    return str(value)


class CsvTable:
    """CSV file with a fixed header; rows are written in the order given."""

    def __init__(self, path: Path, header: Sequence[str]):
        self.path = Path(path)
        self.header = tuple(header)
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._file = self.path.open("w", encoding="utf-8", newline="")
        except OSError as exc:
            raise OutputError(f"cannot open {self.path}: {exc}") from exc
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._writer.writerow(self.header)

    def write_row(self, row: Mapping[str, Any]) -> None:
        try:
            self._writer.writerow([format_value(row[key]) for key in self.header])
        except OSError as exc:
            raise OutputError(f"cannot write {self.path}: {exc}") from exc

    def close(self) -> None:
        self._file.close()

    def __enter__(self) -> "CsvTable":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    with CsvTable(path, header) as table:
        for row in rows:
            table.write_row(row)
    return Path(path)


def write_json_atomic(path: Path, payload: Dict[str, Any]) -> Path:
    """Write JSON through a temp file in the same directory, then replace."""
    target = Path(path)
    tmp_name = None
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=target.name + ".", suffix=".tmp", dir=str(target.parent))
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            json.dump(_jsonable(payload), handle, indent=2, sort_keys=True)
            handle.write("\n")
        os.replace(tmp_name, str(target))
        tmp_name = None
    except OSError as exc:
        raise OutputError(f"cannot write {target}: {exc}") from exc
    finally:
        if tmp_name and Path(tmp_name).exists():
            Path(tmp_name).unlink()
    return target


def save_npz(path: Path, **arrays: np.ndarray) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        np.savez(target, **arrays)
    except OSError as exc:
        raise OutputError(f"cannot write {target}: {exc}") from exc
    return target


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else format_value(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value
