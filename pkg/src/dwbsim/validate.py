"""Pre-run validation of a scenario against the solver and radar preconditions."""

from __future__ import annotations

import logging
import math
from typing import List

from dwbsim.eavesdropper_radar import EQUALIZATIONS, is_unambiguous
from dwbsim.errors import ConfigError, join_problems
from dwbsim.experiments import PATTERN_KINDS, array_response_cases, deception_bearings
from dwbsim.models import QAM_ORDERS, ChannelRealization, ScenarioConfig
from dwbsim.qp_core import QP_METHODS

COMMANDS = ("array-response", "power-sweep", "deceive", "deceive-batch", "solve", "selftest")


def _check_common(config: ScenarioConfig, problems: List[str]) -> None:
    if config.qam_order not in QAM_ORDERS:
        problems.append(f"constellation.order must be one of {QAM_ORDERS}")
    if not (config.noise_var > 0):
        problems.append("noise_var must be positive")
    if config.seed < 0:
        problems.append("seed must be nonnegative")
    if config.workers < 1:
        problems.append("workers must be >= 1")
    if config.array_pattern not in PATTERN_KINDS:
        problems.append(f"array_pattern must be one of {PATTERN_KINDS}")
    solver = config.solver
    if not (solver.tol > 0):
        problems.append("solver.tol must be positive")
    if solver.max_iter < 1:
        problems.append("solver.max_iter must be >= 1")
    if not (solver.rho > 0):
        problems.append("solver.rho must be positive")
    if solver.qp_method not in QP_METHODS:
        problems.append(f"solver.qp_method must be one of {QP_METHODS}")
    radar = config.radar
    if radar.pad_range < 1 or radar.pad_doppler < 1:
        problems.append("radar pad factors must be >= 1")
    if radar.blind_equalization not in EQUALIZATIONS:
        problems.append(f"radar.blind_equalization must be one of {EQUALIZATIONS}")


def _check_fixed_bearings(config: ScenarioConfig, n_t: int, label: str, problems: List[str]) -> None:
    for name, bearings in (
        array_response_cases(config) if label == "array-response" else [(label, deception_bearings(config))]
    ):
        users = bearings.n_comm + bearings.n_eve
        if n_t <= users:
            problems.append(f"{name}: N_T={n_t} must exceed N_c+N_e={users}")


def _check_sweep(config: ScenarioConfig, problems: List[str]) -> None:
    sweep = config.sweep
    if config.n_trials < 1:
        problems.append("n_trials must be >= 1")
    for key in ("n_t", "n_c", "n_e", "snr_db"):
        if not getattr(sweep, key):
            problems.append(f"sweep.{key} must not be empty")
    if problems:
        return
    if any(n < 0 for n in sweep.n_c + sweep.n_e):
        problems.append("sweep counts must be nonnegative")
    if any(not math.isfinite(s) for s in sweep.snr_db):
        problems.append("sweep.snr_db must be finite")
    for n_t, n_c, n_e, _ in sweep.points():
        if n_c + n_e < 1:
            problems.append(f"sweep point n_c={n_c} n_e={n_e} has no receivers")
        elif n_t <= n_c + n_e:
            problems.append(f"sweep point N_T={n_t} must exceed N_c+N_e={n_c + n_e}")
    if config.bearings is not None:
        if config.bearings.n_comm < max(sweep.n_c) or config.bearings.n_eve < max(sweep.n_e):
            problems.append("fixed bearings list is shorter than the largest sweep point")


def _check_targets(config: ScenarioConfig, problems: List[str]) -> None:
    targets = config.targets
    if targets.eve_range_m < 0 or targets.comm_range_m < 0:
        problems.append("target ranges must be nonnegative")
    if not (targets.path_gain > 0):
        problems.append("targets.path_gain must be positive")
    if targets.rx_noise_var < 0:
        problems.append("targets.rx_noise_var must be nonnegative")
    if deception_bearings(config).n_eve < 1:
        problems.append("deception needs at least one eavesdropper bearing")
    if problems:
        return
    doppler = ChannelRealization.for_target(
        config.grid, targets.eve_range_m, targets.eve_velocity_mps
    ).doppler_hz
    fake_range = targets.eve_range_m + config.spoof.fake_range_m
    fake_doppler = doppler + config.spoof.fake_doppler_hz
    if not is_unambiguous(config.grid, fake_range, fake_doppler):
        logging.warning(
            "fake target (%.2f m, %.1f Hz) will alias on this grid", fake_range, fake_doppler
        )


def validate_scenario(config: ScenarioConfig, command: str) -> None:
    """Raise ConfigError listing every precondition the scenario violates for ``command``."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    problems: List[str] = []
    _check_common(config, problems)
    n_t = config.array.n_antennas
    if command == "power-sweep":
        _check_sweep(config, problems)
    elif command == "deceive-batch":
        if config.n_trials < 1:
            problems.append("n_trials must be >= 1")
        if n_t <= 2:
            problems.append(f"N_T={n_t} must exceed 2 for one receiver and one eavesdropper")
    elif command in ("array-response", "solve", "deceive"):
        _check_fixed_bearings(config, n_t, command, problems)
        if command == "deceive":
            _check_targets(config, problems)
    if problems:
        raise ConfigError(join_problems(problems))
