"""Loading and saving scenario JSON files with strict field checks."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

from dwbsim import models
from dwbsim.errors import ConfigError, DomainError
from dwbsim.results_io import write_json_atomic

MAX_CONFIG_BYTES = 256 * 1024

TOP_LEVEL_KEYS = (
    "array",
    "grid",
    "constellation",
    "spoof",
    "bearings",
    "targets",
    "sweep",
    "solver",
    "radar",
    "tx_snr_db",
    "noise_var",
    "n_trials",
    "seed",
    "output_dir",
    "workers",
    "array_pattern",
)


def _coerce_str(value: Any, name: str) -> str:
    if isinstance(value, str) and value:
        return value
    raise ConfigError(f"{name}: expected a non-empty string, got {value!r}")


def _coerce_int(value: Any, name: str) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected an integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise ConfigError(f"{name}: expected an integer, got {value!r}")


def _coerce_float(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    result = float(value)
    if not math.isfinite(result):
        raise ConfigError(f"{name}: must be finite, got {value!r}")
    return result


def _coerce_bool(value: Any, name: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        val = value.strip().lower()
        if val in {"1", "true", "yes", "y", "on"}:
            return True
        if val in {"0", "false", "no", "n", "off"}:
            return False
    raise ConfigError(f"{name}: expected a boolean, got {value!r}")


def _coerce_list(value: Any, name: str, item) -> List:
    if not isinstance(value, list):
        value = [value]
    return [item(v, f"{name}[{i}]") for i, v in enumerate(value)]


def _section(data: Dict[str, Any], key: str, allowed: Iterable[str]) -> Dict[str, Any]:
    raw = data.get(key)
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{key}: expected an object")
    unknown = sorted(k for k in raw if k not in set(allowed))
    if unknown:
        raise ConfigError(f"{key}: unknown keys {unknown}")
    return raw


def _pick(raw: Dict[str, Any], section: str, key: str, coerce, default):
    if key not in raw:
        return default
    return coerce(raw[key], f"{section}.{key}")


def _build_array(data: Dict[str, Any]) -> models.ArrayGeometry:
    raw = _section(data, "array", ("n_antennas", "spacing_over_wavelength"))
    d = models.ArrayGeometry()
    return models.ArrayGeometry(
        n_antennas=_pick(raw, "array", "n_antennas", _coerce_int, d.n_antennas),
        spacing_over_wavelength=_pick(
            raw, "array", "spacing_over_wavelength", _coerce_float, d.spacing_over_wavelength
        ),
    )


def _build_grid(data: Dict[str, Any]) -> models.OfdmGrid:
    raw = _section(
        data,
        "grid",
        ("n_subcarriers", "subcarrier_spacing_hz", "n_symbols", "carrier_hz", "cp_len"),
    )
    d = models.OfdmGrid()
    return models.OfdmGrid(
        n_subcarriers=_pick(raw, "grid", "n_subcarriers", _coerce_int, d.n_subcarriers),
        subcarrier_spacing_hz=_pick(
            raw, "grid", "subcarrier_spacing_hz", _coerce_float, d.subcarrier_spacing_hz
        ),
        n_symbols=_pick(raw, "grid", "n_symbols", _coerce_int, d.n_symbols),
        carrier_hz=_pick(raw, "grid", "carrier_hz", _coerce_float, d.carrier_hz),
        cp_len=_pick(raw, "grid", "cp_len", _coerce_int, d.cp_len),
    )


def _build_spoof(data: Dict[str, Any]) -> models.SpoofProfile:
    raw = _section(data, "spoof", ("fake_range_m", "fake_doppler_hz"))
    return models.SpoofProfile(
        fake_range_m=_pick(raw, "spoof", "fake_range_m", _coerce_float, 0.0),
        fake_doppler_hz=_pick(raw, "spoof", "fake_doppler_hz", _coerce_float, 0.0),
    )


def _build_bearings(data: Dict[str, Any]) -> Optional[models.Bearings]:
    if data.get("bearings") is None:
        return None
    raw = _section(data, "bearings", ("comm_deg", "eve_deg"))
    comm = _coerce_list(raw.get("comm_deg", []), "bearings.comm_deg", _coerce_float)
    eve = _coerce_list(raw.get("eve_deg", []), "bearings.eve_deg", _coerce_float)
    return models.Bearings.from_degrees(comm, eve)


def _build_targets(data: Dict[str, Any]) -> models.TargetConfig:
    names = (
        "eve_range_m",
        "eve_velocity_mps",
        "comm_range_m",
        "comm_velocity_mps",
        "path_gain",
        "rx_noise_var",
    )
    raw = _section(data, "targets", names)
    d = models.TargetConfig()
    return models.TargetConfig(
        **{name: _pick(raw, "targets", name, _coerce_float, getattr(d, name)) for name in names}
    )


def _build_sweep(data: Dict[str, Any]) -> models.SweepConfig:
    raw = _section(data, "sweep", ("n_t", "n_c", "n_e", "snr_db"))
    d = models.SweepConfig()

    def ints(key):
        if key not in raw:
            return getattr(d, key)
        return tuple(_coerce_list(raw[key], f"sweep.{key}", _coerce_int))

    snr = (
        tuple(_coerce_list(raw["snr_db"], "sweep.snr_db", _coerce_float))
        if "snr_db" in raw
        else d.snr_db
    )
    return models.SweepConfig(n_t=ints("n_t"), n_c=ints("n_c"), n_e=ints("n_e"), snr_db=snr)


def _build_solver(data: Dict[str, Any]) -> models.SolverOptions:
    raw = _section(
        data,
        "solver",
        ("tol", "max_iter", "rho", "polish", "resolve_after_rounding", "decompose", "qp_method"),
    )
    d = models.SolverOptions()
    return models.SolverOptions(
        tol=_pick(raw, "solver", "tol", _coerce_float, d.tol),
        max_iter=_pick(raw, "solver", "max_iter", _coerce_int, d.max_iter),
        rho=_pick(raw, "solver", "rho", _coerce_float, d.rho),
        polish=_pick(raw, "solver", "polish", _coerce_bool, d.polish),
        resolve_after_rounding=_pick(
            raw, "solver", "resolve_after_rounding", _coerce_bool, d.resolve_after_rounding
        ),
        decompose=_pick(raw, "solver", "decompose", _coerce_bool, d.decompose),
        qp_method=_pick(raw, "solver", "qp_method", _coerce_str, d.qp_method),
    )


def _build_radar(data: Dict[str, Any]) -> models.RadarOptions:
    raw = _section(data, "radar", ("pad_range", "pad_doppler", "interpolate", "blind_equalization"))
    d = models.RadarOptions()
    return models.RadarOptions(
        pad_range=_pick(raw, "radar", "pad_range", _coerce_int, d.pad_range),
        pad_doppler=_pick(raw, "radar", "pad_doppler", _coerce_int, d.pad_doppler),
        interpolate=_pick(raw, "radar", "interpolate", _coerce_bool, d.interpolate),
        blind_equalization=_pick(
            raw, "radar", "blind_equalization", _coerce_str, d.blind_equalization
        ),
    )


def config_from_dict(data: Dict[str, Any]) -> models.ScenarioConfig:
    """Build a ScenarioConfig; unknown keys and malformed values raise ConfigError."""
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a JSON object")
    unknown = sorted(k for k in data if k not in TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown top-level keys {unknown}")
    d = models.ScenarioConfig()
    constellation = _section(data, "constellation", ("order",))
    output_dir = data.get("output_dir")
    try:
        return models.ScenarioConfig(
            array=_build_array(data),
            grid=_build_grid(data),
            qam_order=_pick(constellation, "constellation", "order", _coerce_int, d.qam_order),
            spoof=_build_spoof(data),
            bearings=_build_bearings(data),
            targets=_build_targets(data),
            sweep=_build_sweep(data),
            solver=_build_solver(data),
            radar=_build_radar(data),
            tx_snr_db=_pick(data, "scenario", "tx_snr_db", _coerce_float, d.tx_snr_db),
            noise_var=_pick(data, "scenario", "noise_var", _coerce_float, d.noise_var),
            n_trials=_pick(data, "scenario", "n_trials", _coerce_int, d.n_trials),
            seed=_pick(data, "scenario", "seed", _coerce_int, d.seed),
            output_dir=None if output_dir is None else _coerce_str(output_dir, "output_dir"),
            workers=_pick(data, "scenario", "workers", _coerce_int, d.workers),
            array_pattern=_pick(data, "scenario", "array_pattern", _coerce_str, d.array_pattern),
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(config: models.ScenarioConfig) -> Dict[str, Any]:
    """Inverse of config_from_dict (angles back in degrees)."""
    bearings = None
    if config.bearings is not None:
        bearings = {
            "comm_deg": [math.degrees(a) for a in config.bearings.comm_angles_rad],
            "eve_deg": [math.degrees(a) for a in config.bearings.eve_angles_rad],
        }
    sweep = config.sweep
    return {
        "array": {
            "n_antennas": config.array.n_antennas,
            "spacing_over_wavelength": config.array.spacing_over_wavelength,
        },
        "grid": {
            "n_subcarriers": config.grid.n_subcarriers,
            "subcarrier_spacing_hz": config.grid.subcarrier_spacing_hz,
            "n_symbols": config.grid.n_symbols,
            "carrier_hz": config.grid.carrier_hz,
            "cp_len": config.grid.cp_len,
        },
        "constellation": {"order": config.qam_order},
        "spoof": {
            "fake_range_m": config.spoof.fake_range_m,
            "fake_doppler_hz": config.spoof.fake_doppler_hz,
        },
        "bearings": bearings,
        "targets": vars(config.targets).copy(),
        "sweep": {
            "n_t": list(sweep.n_t),
            "n_c": list(sweep.n_c),
            "n_e": list(sweep.n_e),
            "snr_db": list(sweep.snr_db),
        },
        "solver": vars(config.solver).copy(),
        "radar": vars(config.radar).copy(),
        "tx_snr_db": config.tx_snr_db,
        "noise_var": config.noise_var,
        "n_trials": config.n_trials,
        "seed": config.seed,
        "output_dir": config.output_dir,
        "workers": config.workers,
        "array_pattern": config.array_pattern,
    }


def _load_json(path: Path) -> Any:
    try:
        if path.stat().st_size > MAX_CONFIG_BYTES:
            raise ConfigError(f"{path} is larger than {MAX_CONFIG_BYTES // 1024} KB")
        with path.open("r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def load_config(path: Optional[Path | str]) -> models.ScenarioConfig:
    """Load a scenario file; ``None`` gives the built-in defaults."""
    if path is None:
        return models.ScenarioConfig()
    return config_from_dict(_load_json(Path(path)))


def save_config(path: Path | str, config: models.ScenarioConfig) -> Path:
    return write_json_atomic(Path(path), config_to_dict(config))
