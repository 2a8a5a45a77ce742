"""Self-test runner for CI/local validation; small instances, a few seconds end to end."""

from __future__ import annotations

import logging
import math
import sys

import numpy as np

from dwbsim import signal_model
from dwbsim.beamformer import DwbProblem, exhaustive_dwb_power, solve_dwb, solve_nulling
from dwbsim.errors import DwbError
from dwbsim.experiments import simulate_deception, trial_rng
from dwbsim.models import (
    ArrayGeometry,
    Bearings,
    OfdmGrid,
    QamConstellation,
    ScenarioConfig,
    SpoofProfile,
    TargetConfig,
)


def _check_unitarity() -> bool:
    for n in (1, 2, 16, 64):
        f_h = signal_model.idft_matrix(n)
        err = float(np.max(np.abs(f_h @ f_h.conj().T - np.eye(n))))
        if err >= 1e-12:
            logging.error("IDFT unitarity check failed for L=%d: max error %.3e", n, err)
            return False
    return True


def _check_tiny_solve() -> bool:
    grid = OfdmGrid(n_subcarriers=2, n_symbols=1, cp_len=1)
    rng = np.random.default_rng(7)
    constellation = QamConstellation(order=4)
    problem = DwbProblem(
        geometry=ArrayGeometry(n_antennas=4),
        bearings=Bearings.from_degrees([60.0], [110.0]),
        grid=grid,
        constellation=constellation,
        spoof=SpoofProfile(30.0, 500.0),
        comm_symbols=constellation.random_symbols(rng, (1, 2)),
        tx_snr_db=10.0,
    )
    dwb = solve_dwb(problem)
    nulling = solve_nulling(problem)
    best, _ = exhaustive_dwb_power(problem)
    slack = 1e-9 * max(1.0, nulling.power_w)
    if not (dwb.relaxed_power_w <= best + slack and best <= dwb.power_w + slack):
        logging.error(
            "Sandwich check failed: relaxed=%.9g exhaustive=%.9g rounded=%.9g",
            dwb.relaxed_power_w,
            best,
            dwb.power_w,
        )
        return False
    if dwb.relaxed_power_w > nulling.power_w + slack:
        logging.error(
            "Dominance check failed: relaxed=%.9g nulling=%.9g", dwb.relaxed_power_w, nulling.power_w
        )
        return False
    return True


def _check_deception() -> bool:
    config = ScenarioConfig(
        grid=OfdmGrid(n_subcarriers=16, n_symbols=8, cp_len=4),
        qam_order=16,
        bearings=Bearings.from_degrees([80.0], [70.0]),
        targets=TargetConfig(eve_range_m=20.0, eve_velocity_mps=10.0),
    )
    spoof = SpoofProfile(30.0, 500.0)
    report, _ = simulate_deception(config, config.bearings, 20.0, 10.0, spoof, trial_rng(0, 0))
    if not report.deceived:
        logging.error(
            "Deception check failed: estimate=(%.2f m, %.1f Hz) fake=(%.2f m, %.1f Hz)",
            report.known.range_m,
            report.known.doppler_hz,
            report.fake_range_m,
            report.fake_doppler_hz,
        )
        return False
    if report.comm_symbol_errors:
        logging.error("Comm check failed: %d symbol errors", report.comm_symbol_errors)
        return False
    return math.isfinite(report.mean_power_w)


def main() -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    checks = (
        ("unitarity", _check_unitarity),
        ("tiny-solve", _check_tiny_solve),
        ("deception", _check_deception),
    )
    for name, check in checks:
        try:
            ok = check()
        except DwbError as exc:
            logging.error("Selftest %s raised %s: %s", name, type(exc).__name__, exc)
            return 1
        if not ok:
            return 1
        logging.info("Selftest %s ok", name)
    logging.info("Selftest passed: checks=%d", len(checks))
    return 0


if __name__ == "__main__":
    sys.exit(main())
