"""Experiments: array responses, paired power sweeps and end-to-end deception runs."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.signal

from dwbsim import plots, results_io, signal_model
from dwbsim.beamformer import DwbProblem, solve_dwb, solve_nulling
from dwbsim.eavesdropper_radar import (
    PeakEstimate,
    RangeDopplerMap,
    SymbolKnowledge,
    blind_demod,
    collect_frame,
    estimate_range_doppler,
    is_unambiguous,
    max_unambiguous_range_m,
)
from dwbsim.errors import DomainError, DwbError
from dwbsim.models import (
    SPEED_OF_LIGHT,
    ArrayGeometry,
    Bearings,
    ChannelRealization,
    ScenarioConfig,
    SpoofProfile,
    TrialRecord,
)

PATTERN_KINDS = ("energy", "first-column")
DB_FLOOR = -300.0
MIN_SEPARATION_DEG = 2.0
MAX_RESAMPLES = 1000
NEAR_CASE = ("near", (80.0,), (70.0, 90.0))
FAR_CASE = ("far", (80.0,), (30.0, 50.0))


def trial_rng(seed: int, trial_id: int) -> np.random.Generator:
    """Independent stream per (master seed, trial) so results do not depend on scheduling."""
    return np.random.default_rng([int(seed), int(trial_id)])


# --- array response -------------------------------------------------------


@dataclass(frozen=True)
class ArrayResponse:
    angles_rad: np.ndarray
    magnitude_db: np.ndarray
    pattern: str = "first-column"

    @property
    def angles_deg(self) -> np.ndarray:
        return np.degrees(self.angles_rad)

    @property
    def peak_angle_rad(self) -> float:
        return float(self.angles_rad[int(np.argmax(self.magnitude_db))])

    def value_at(self, angle_rad: float) -> float:
        """Magnitude (dB) at the grid angle closest to ``angle_rad``."""
        return float(self.magnitude_db[int(np.argmin(np.abs(self.angles_rad - angle_rad)))])


def default_angle_grid() -> np.ndarray:
    """0..180 degrees in 0.25 degree steps, in radians."""
    return np.radians(np.linspace(0.0, 180.0, 721))


def array_response(
    tx_signal: np.ndarray,
    geometry: ArrayGeometry,
    angle_grid: Optional[Sequence[float]] = None,
    pattern: str = "first-column",
) -> ArrayResponse:
    """|B(theta)| over the grid, peak-normalized in dB.

    ``first-column`` uses a(theta)^T S[:, 0]; ``energy`` uses ||S^T a(theta)||.
    """
    if pattern not in PATTERN_KINDS:
        raise DomainError(f"pattern must be one of {PATTERN_KINDS}")
    s = np.asarray(tx_signal, dtype=complex)
    if s.ndim == 1:
        s = s[:, None]
    if not np.any(s):
        raise DomainError("array response of an all-zero signal")
    angles = default_angle_grid() if angle_grid is None else np.asarray(angle_grid, dtype=float)
    steer = signal_model.steering_matrix(geometry, angles)
    if pattern == "first-column":
        mag = np.abs(steer @ s[:, 0])
    else:
        mag = np.linalg.norm(steer @ s, axis=1)
    peak = float(np.max(mag))
    if peak == 0.0:
        raise DomainError("beampattern is identically zero on the grid")
    with np.errstate(divide="ignore"):
        mag_db = 20.0 * np.log10(mag / peak)
    return ArrayResponse(angles, np.maximum(mag_db, DB_FLOOR), pattern)


def psl_db(response: ArrayResponse) -> float:
    """Main peak minus the largest local maximum outside the main lobe's -3 dB region."""
    db = response.magnitude_db
    peak = int(np.argmax(db))
    below = np.flatnonzero(db < db[peak] - 3.0)
    left, right = below[below < peak], below[below > peak]
    lo = int(left[-1]) + 1 if left.size else 0
    hi = int(right[0]) - 1 if right.size else db.size - 1
    # pad so that maxima at the grid edges count as peaks
    padded = np.concatenate([[-np.inf], db, [-np.inf]])
    maxima = scipy.signal.find_peaks(padded)[0] - 1
    sidelobes = maxima[(maxima < lo) | (maxima > hi)]
    if sidelobes.size == 0:
        return math.inf
    return float(db[peak] - np.max(db[sidelobes]))


def _problem(
    config: ScenarioConfig,
    bearings: Bearings,
    comm_symbols: np.ndarray,
    n_t: Optional[int] = None,
    snr_db: Optional[float] = None,
) -> DwbProblem:
    geometry = config.array if n_t is None else replace(config.array, n_antennas=n_t)
    return DwbProblem(
        geometry=geometry,
        bearings=bearings,
        grid=config.grid,
        constellation=config.constellation,
        spoof=config.spoof,
        comm_symbols=comm_symbols,
        tx_snr_db=config.tx_snr_db if snr_db is None else snr_db,
        noise_var=config.noise_var,
        options=config.solver,
    )


def array_response_cases(config: ScenarioConfig) -> List[Tuple[str, Bearings]]:
    if config.bearings is not None:
        return [("config", config.bearings)]
    return [(name, Bearings.from_degrees(comm, eve)) for name, comm, eve in (NEAR_CASE, FAR_CASE)]


@dataclass
class ArrayResponseCase:
    name: str
    bearings: Bearings
    responses: Dict[str, ArrayResponse]
    metrics: Dict[str, Dict[str, Any]]


def compare_array_responses(config: ScenarioConfig) -> List[ArrayResponseCase]:
    """DWB vs nulling beampatterns for each bearing case, with PSL and null depths."""
    cases = []
    for index, (name, bearings) in enumerate(array_response_cases(config)):
        rng = trial_rng(config.seed, index)
        comm = config.constellation.random_symbols(
            rng, (bearings.n_comm, config.grid.n_subcarriers)
        )
        problem = _problem(config, bearings, comm)
        signals = {
            "nulling": solve_nulling(problem).tx_signal,
            "dwb": solve_dwb(problem).tx_signal,
        }
        responses, metrics = {}, {}
        for scheme, s in signals.items():
            resp = array_response(s, config.array, pattern=config.array_pattern)
            responses[scheme] = resp
            metrics[scheme] = {
                "psl_db": psl_db(resp),
                "peak_angle_deg": math.degrees(resp.peak_angle_rad),
                "eve_levels_db": {
                    f"{math.degrees(a):g}": resp.value_at(a) for a in bearings.eve_angles_rad
                },
            }
        logging.info(
            "ARRAY case=%s psl_dwb=%.2f psl_nulling=%.2f peak_dwb=%.2f",
            name,
            metrics["dwb"]["psl_db"],
            metrics["nulling"]["psl_db"],
            metrics["dwb"]["peak_angle_deg"],
        )
        cases.append(ArrayResponseCase(name, bearings, responses, metrics))
    return cases


def run_array_response(config: ScenarioConfig, out_dir: Path) -> Dict[str, Path]:
    cases = compare_array_responses(config)
    rows = []
    for position, case in enumerate(cases):
        for scheme, resp in case.responses.items():
            label = scheme if position == 0 else f"{scheme}-{case.name}"
            rows.extend(
                {"angle_deg": a, "magnitude_db": m, "scheme": label}
                for a, m in zip(resp.angles_deg, resp.magnitude_db)
            )
    out = {"csv": results_io.write_csv(out_dir / "array_response.csv", results_io.ARRAY_RESPONSE_HEADER, rows)}
    out["json"] = results_io.write_json_atomic(
        out_dir / "array_response.json",
        {
            "pattern": config.array_pattern,
            "n_antennas": config.array.n_antennas,
            "cases": {
                c.name: {
                    "comm_deg": [math.degrees(a) for a in c.bearings.comm_angles_rad],
                    "eve_deg": [math.degrees(a) for a in c.bearings.eve_angles_rad],
                    "metrics": c.metrics,
                }
                for c in cases
            },
        },
    )
    for position, case in enumerate(cases):
        name = "array_response.svg" if position == 0 else f"array_response_{case.name}.svg"
        curves = {k: (r.angles_deg, r.magnitude_db) for k, r in case.responses.items()}
        markers = [math.degrees(a) for a in case.bearings.comm_angles_rad + case.bearings.eve_angles_rad]
        out[name] = plots.plot_array_responses(curves, markers, out_dir / name, title=case.name)
    return out


# --- random topologies and power sweeps -----------------------------------


@dataclass(frozen=True)
class Topology:
    bearings: Bearings
    comm_distances_m: Tuple[float, ...]
    eve_distances_m: Tuple[float, ...]


def random_topology(
    rng: np.random.Generator,
    n_c: int,
    n_e: int,
    min_separation_deg: float = MIN_SEPARATION_DEG,
    max_resamples: int = MAX_RESAMPLES,
) -> Topology:
    """Uniform bearings in [0, 180] deg and distances in [1, 100] m, bearings kept apart."""
    if n_c < 0 or n_e < 0:
        raise DomainError("receiver counts must be nonnegative")
    total = n_c + n_e
    for _ in range(max_resamples + 1):
        angles = rng.uniform(0.0, 180.0, size=total)
        if total < 2 or np.min(np.diff(np.sort(angles))) >= min_separation_deg:
            break
    else:
        raise DomainError(
            f"could not place {total} bearings {min_separation_deg} deg apart "
            f"after {max_resamples} resamples"
        )
    distances = rng.uniform(1.0, 100.0, size=total)
    return Topology(
        bearings=Bearings.from_degrees(angles[:n_c], angles[n_c:]),
        comm_distances_m=tuple(float(d) for d in distances[:n_c]),
        eve_distances_m=tuple(float(d) for d in distances[n_c:]),
    )


def _sweep_inputs(config: ScenarioConfig, trial_id: int) -> Tuple[Bearings, np.ndarray]:
    """Topology and comm-symbol draw shared by every sweep point of one trial."""
    rng = trial_rng(config.seed, trial_id)
    sweep = config.sweep
    n_c_max, n_e_max = max(sweep.n_c), max(sweep.n_e)
    if config.bearings is None:
        bearings = random_topology(rng, n_c_max, n_e_max).bearings
    else:
        bearings = config.bearings
    comm = config.constellation.random_symbols(rng, (n_c_max, config.grid.n_subcarriers))
    return bearings, comm


def sweep_problem(
    config: ScenarioConfig, trial_id: int, n_t: int, n_c: int, n_e: int, snr_db: float
) -> DwbProblem:
    """The exact problem ``power_sweep`` solves for one trial and sweep point."""
    bearings, comm = _sweep_inputs(config, trial_id)
    return _problem(config, bearings.subset(n_c, n_e), comm[:n_c], n_t=n_t, snr_db=snr_db)


def _sweep_trial(config: ScenarioConfig, trial_id: int) -> List[TrialRecord]:
    """All sweep points for one trial on one topology and one comm-symbol draw."""
    bearings, comm = _sweep_inputs(config, trial_id)

    records = []
    for n_t, n_c, n_e, snr in config.sweep.points():

        record = TrialRecord(trial_id, n_t, n_c, n_e, snr, seed=config.seed)
        try:
            problem = _problem(config, bearings.subset(n_c, n_e), comm[:n_c], n_t=n_t, snr_db=snr)
            dwb = solve_dwb(problem)
            nulling = solve_nulling(problem)
            geometry = problem.geometry
            record.dwb_power_w = dwb.power_w
            record.dwb_relaxed_power_w = dwb.relaxed_power_w
            record.nulling_power_w = nulling.power_w
            record.psl_db_dwb = psl_db(array_response(dwb.tx_signal, geometry, pattern=config.array_pattern))
            record.psl_db_nulling = psl_db(
                array_response(nulling.tx_signal, geometry, pattern=config.array_pattern)
            )
        except DwbError as exc:
            logging.warning(
                "TRIAL id=%d n_t=%d n_c=%d n_e=%d snr=%g failed: %s", trial_id, n_t, n_c, n_e, snr, exc
            )
            record.errors = 1
        else:
            logging.debug(
                "TRIAL id=%d n_t=%d n_c=%d n_e=%d snr=%g dwb=%.6g relaxed=%.6g nulling=%.6g",
                trial_id,
                n_t,
                n_c,
                n_e,
                snr,
                record.dwb_power_w,
                record.dwb_relaxed_power_w,
                record.nulling_power_w,
            )
        records.append(record)
    return records


def power_sweep(config: ScenarioConfig) -> List[TrialRecord]:
    """Paired DWB/nulling solves for every trial and sweep point, sorted by trial_id."""
    run = partial(_sweep_trial, config)
    trial_ids = range(config.n_trials)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(run, trial_ids))
    else:
        chunks = [run(t) for t in trial_ids]
    records = [r for chunk in chunks for r in chunk]
    records.sort(key=lambda r: r.trial_id)
    failed = sum(r.errors for r in records)
    logging.info("SWEEP trials=%d rows=%d errors=%d", config.n_trials, len(records), failed)
    return records


def _ci95(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(1.96 * np.std(values, ddof=1) / math.sqrt(values.size))


def summarize_sweep(records: Sequence[TrialRecord], config: ScenarioConfig) -> List[Dict[str, Any]]:
    """Mean powers with normal-approximation 95% intervals per sweep point."""
    rows = []
    for point in config.sweep.points():
        ok = [r for r in records if (r.n_t, r.n_c, r.n_e, r.snr_db) == point and not r.errors]
        dwb = np.array([r.dwb_power_w for r in ok])
        relaxed = np.array([r.dwb_relaxed_power_w for r in ok])
        nulling = np.array([r.nulling_power_w for r in ok])
        dwb_mean = float(np.mean(dwb)) if ok else math.nan
        nulling_mean = float(np.mean(nulling)) if ok else math.nan
        saving = 100.0 * (nulling_mean - dwb_mean) / dwb_mean if ok and dwb_mean > 0 else math.nan
        rows.append(
            {
                "n_t": point[0],
                "n_c": point[1],
                "n_e": point[2],
                "snr_db": point[3],
                "n_ok": len(ok),
                "dwb_mean_w": dwb_mean,
                "dwb_ci95_w": _ci95(dwb),
                "dwb_relaxed_mean_w": float(np.mean(relaxed)) if ok else math.nan,
                "nulling_mean_w": nulling_mean,
                "nulling_ci95_w": _ci95(nulling),
                "saving_pct": saving,
            }
        )
    return rows


def run_power_sweep(config: ScenarioConfig, out_dir: Path) -> Dict[str, Path]:
    records = power_sweep(config)
    summary = summarize_sweep(records, config)
    for row in summary:
        logging.info(
            "POINT n_t=%d n_c=%d n_e=%d snr=%g ok=%d dwb=%.6g nulling=%.6g saving=%.1f%%",
            row["n_t"],
            row["n_c"],
            row["n_e"],
            row["snr_db"],
            row["n_ok"],
            row["dwb_mean_w"],
            row["nulling_mean_w"],
            row["saving_pct"],
        )
    return {
        "csv": results_io.write_csv(
            out_dir / "power_sweep.csv", results_io.POWER_SWEEP_HEADER, (r.to_dict() for r in records)
        ),
        "summary": results_io.write_csv(
            out_dir / "power_sweep_summary.csv", results_io.SWEEP_SUMMARY_HEADER, summary
        ),
        "svg": plots.plot_power_sweep(summary, out_dir / "power_sweep.svg"),
    }


# --- deception ------------------------------------------------------------


@dataclass
class DeceptionReport:
    """Radar estimates against the fake and true targets.

    ``known`` is the preamble-aided estimate the deception is judged on. The
    ``blind`` estimate comes from nearest-point decisions without channel
    tracking. The power-optimal deceptive symbols follow the comm beam's
    leakage toward the eavesdropper, so the spoof phase ramp rides in the
    symbols and blind slicing strips it along with the data. The blind peak
    therefore sits at the true range.
    """

    true_range_m: float
    true_doppler_hz: float
    fake_range_m: float
    fake_doppler_hz: float
    known: PeakEstimate
    blind: PeakEstimate
    comm_symbol_errors: int
    comm_symbols_total: int
    mean_power_w: float
    mean_relaxed_power_w: float
    range_tolerance_m: float
    doppler_tolerance_hz: float
    unambiguous: bool
    max_comm_residual_rel: float = 0.0
    # fraction of blind decisions that differ from the deceptive symbols actually sent
    blind_symbol_error_rate: float = 0.0

    @property
    def range_error_m(self) -> float:
        return abs(self.known.range_m - self.fake_range_m)

    @property
    def doppler_error_hz(self) -> float:
        return abs(self.known.doppler_hz - self.fake_doppler_hz)

    @property
    def deceived(self) -> bool:
        return (
            self.range_error_m <= self.range_tolerance_m
            and self.doppler_error_hz <= self.doppler_tolerance_hz
        )

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.update(
            range_error_m=self.range_error_m,
            doppler_error_hz=self.doppler_error_hz,
            deceived=self.deceived,
            blind_range_error_m=abs(self.blind.range_m - self.fake_range_m),
            blind_doppler_error_hz=abs(self.blind.doppler_hz - self.fake_doppler_hz),
        )
        return data


def simulate_deception(
    config: ScenarioConfig,
    bearings: Bearings,
    eve_range_m: float,
    eve_velocity_mps: float,
    spoof: SpoofProfile,
    rng: np.random.Generator,
    noise_seed: int = 0,
) -> Tuple[DeceptionReport, RangeDopplerMap]:
    """Solve every OFDM symbol of a frame, receive it at eavesdropper 0 and run its radar."""
    if bearings.n_eve < 1:
        raise DomainError("deception needs at least one eavesdropper bearing")
    grid, targets = config.grid, config.targets
    config = replace(config, spoof=spoof)
    eve_channel = ChannelRealization.for_target(
        grid, eve_range_m, eve_velocity_mps, targets.path_gain, targets.rx_noise_var
    )
    comm_channel = ChannelRealization.for_target(
        grid, targets.comm_range_m, targets.comm_velocity_mps, targets.path_gain, targets.rx_noise_var
    )
    eve_steer = signal_model.steering_vector(config.array, bearings.eve_angles_rad[0])
    comm_steer = (
        signal_model.steering_vector(config.array, bearings.comm_angles_rad[0])
        if bearings.n_comm
        else None
    )

    received, emitted = [], []
    powers, relaxed_powers, residuals = [], [], []
    comm_errors = comm_total = 0
    for m in range(grid.n_symbols):
        comm = config.constellation.random_symbols(rng, (bearings.n_comm, grid.n_subcarriers))
        problem = _problem(config, bearings, comm)
        solution = solve_dwb(problem.at_symbol(m))
        powers.append(solution.power_w)
        relaxed_powers.append(solution.relaxed_power_w)
        residuals.append(solution.solver_diag.comm_residual_rel)
        emitted.append(
            solution.deceptive_symbols_rounded[0]
            if config.solver.resolve_after_rounding
            else solution.deceptive_symbols_relaxed[0]
        )
        received.append(
            signal_model.simulate_rx(
                solution.tx_signal, eve_steer, eve_channel, grid, m, rng_seed=[noise_seed, m, 0]
            )
        )
        if comm_steer is not None:
            y_c = signal_model.simulate_rx(
                solution.tx_signal, comm_steer, comm_channel, grid, m, rng_seed=[noise_seed, m, 1]
            )
            equalized = signal_model.ofdm_demod(y_c) / signal_model.freq_channel_diag(
                comm_channel, grid, m
            )
            scaled = problem.constellation.scaled(solution.symbol_power_w)
            decided = signal_model.qam_nearest(equalized, scaled)
            sent = comm[0] * math.sqrt(solution.symbol_power_w)
            tol = 1e-9 * math.sqrt(solution.symbol_power_w)
            comm_errors += int(np.count_nonzero(np.abs(decided - sent) > tol))
            comm_total += grid.n_subcarriers

    frame = collect_frame(received, grid)
    scaled_constellation = config.constellation.scaled(solution.symbol_power_w)
    known, rd_map = estimate_range_doppler(
        frame, SymbolKnowledge("known", np.column_stack(emitted)), config.radar, scaled_constellation
    )
    blind, _ = estimate_range_doppler(
        frame, SymbolKnowledge("blind"), config.radar, scaled_constellation
    )
    decided = blind_demod(frame, scaled_constellation, config.radar.blind_equalization)
    tol = 1e-9 * math.sqrt(solution.symbol_power_w)
    blind_wrong = np.abs(decided - np.column_stack(emitted)) > tol
    fake_range = eve_range_m + spoof.fake_range_m
    fake_doppler = eve_channel.doppler_hz + spoof.fake_doppler_hz
    unambiguous = is_unambiguous(grid, fake_range, fake_doppler)
    if not unambiguous:
        logging.warning(
            "fake target (%.2f m, %.1f Hz) lies outside the unambiguous region", fake_range, fake_doppler
        )
    p = config.radar.pad_range * grid.n_subcarriers
    q = config.radar.pad_doppler * grid.n_symbols
    report = DeceptionReport(
        true_range_m=eve_range_m,
        true_doppler_hz=eve_channel.doppler_hz,
        fake_range_m=fake_range,
        fake_doppler_hz=fake_doppler,
        known=known,
        blind=blind,
        comm_symbol_errors=comm_errors,
        comm_symbols_total=comm_total,
        mean_power_w=float(np.mean(powers)),
        mean_relaxed_power_w=float(np.mean(relaxed_powers)),
        range_tolerance_m=SPEED_OF_LIGHT / (2.0 * p * grid.subcarrier_spacing_hz),
        doppler_tolerance_hz=1.0 / (2.0 * q * grid.symbol_duration_s),
        unambiguous=unambiguous,
        max_comm_residual_rel=float(np.max(residuals)),
        blind_symbol_error_rate=float(np.mean(blind_wrong)),
    )
    return report, rd_map


def deception_bearings(config: ScenarioConfig) -> Bearings:
    if config.bearings is not None:
        return config.bearings
    _, comm, eve = NEAR_CASE
    return Bearings.from_degrees(comm, eve)


def deception_demo(config: ScenarioConfig) -> Tuple[DeceptionReport, RangeDopplerMap]:
    """Deception run at the configured targets, spoof and bearings."""
    targets = config.targets
    report, rd_map = simulate_deception(
        config,
        deception_bearings(config),
        targets.eve_range_m,
        targets.eve_velocity_mps,
        config.spoof,
        trial_rng(config.seed, 0),
        noise_seed=config.seed,
    )
    logging.info(
        "DECEIVE fake=(%.2f m, %.1f Hz) known=(%.2f m, %.1f Hz) blind=(%.2f m, %.1f Hz) "
        "blind_ser=%.3f comm_errors=%d",
        report.fake_range_m,
        report.fake_doppler_hz,
        report.known.range_m,
        report.known.doppler_hz,
        report.blind.range_m,
        report.blind.doppler_hz,
        report.blind_symbol_error_rate,
        report.comm_symbol_errors,
    )
    return report, rd_map


def run_deception(config: ScenarioConfig, out_dir: Path) -> Dict[str, Path]:
    report, rd_map = deception_demo(config)
    mag_db = rd_map.magnitude_db()
    rows = (
        {"range_m": r, "doppler_hz": d, "magnitude_db": mag_db[i, j]}
        for i, r in enumerate(rd_map.range_axis_m)
        for j, d in enumerate(rd_map.doppler_axis_hz)
    )
    return {
        "json": results_io.write_json_atomic(out_dir / "deception.json", report.to_dict()),
        "csv": results_io.write_csv(out_dir / "range_doppler.csv", results_io.RANGE_DOPPLER_HEADER, rows),
        "svg": plots.plot_range_doppler(
            mag_db,
            rd_map.range_axis_m,
            rd_map.doppler_axis_hz,
            out_dir / "range_doppler.svg",
            marker=(report.fake_range_m, report.fake_doppler_hz),
        ),
    }


def _deception_trial(config: ScenarioConfig, trial_id: int) -> Dict[str, Any]:
    rng = trial_rng(config.seed, trial_id)
    grid = config.grid
    topology = random_topology(rng, 1, 1)
    eve_range = topology.eve_distances_m[0]
    velocity = float(rng.uniform(-30.0, 30.0))
    doppler = velocity * grid.carrier_hz / SPEED_OF_LIGHT
    total_range = float(rng.uniform(0.05, 0.9)) * max_unambiguous_range_m(grid)
    total_doppler = float(rng.uniform(-0.4, 0.4)) * grid.subcarrier_spacing_hz
    spoof = SpoofProfile(total_range - eve_range, total_doppler - doppler)
    report, _ = simulate_deception(
        config, topology.bearings, eve_range, velocity, spoof, rng, noise_seed=config.seed
    )
    return {
        "trial_id": trial_id,
        "n_t": config.array.n_antennas,
        "true_range_m": report.true_range_m,
        "true_doppler_hz": report.true_doppler_hz,
        "fake_range_m": report.fake_range_m,
        "fake_doppler_hz": report.fake_doppler_hz,
        "est_range_m": report.known.range_m,
        "est_doppler_hz": report.known.doppler_hz,
        "deception_range_err_m": report.range_error_m,
        "deception_doppler_err_hz": report.doppler_error_hz,
        "seed": config.seed,
    }


def deception_trials(config: ScenarioConfig) -> List[Dict[str, Any]]:
    """Noiseless-by-default demos with random targets and spoofs inside the unambiguous region."""
    run = partial(_deception_trial, config)
    trial_ids = range(config.n_trials)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(run, trial_ids))
    else:
        rows = [run(t) for t in trial_ids]
    worst_r = max((r["deception_range_err_m"] for r in rows), default=math.nan)
    worst_d = max((r["deception_doppler_err_hz"] for r in rows), default=math.nan)
    logging.info(
        "DECEIVE-BATCH trials=%d max_range_err=%.3f m max_doppler_err=%.1f Hz", len(rows), worst_r, worst_d
    )
    return rows


def run_deception_trials(config: ScenarioConfig, out_dir: Path) -> Dict[str, Path]:
    rows = deception_trials(config)
    return {
        "csv": results_io.write_csv(
            out_dir / "deception_trials.csv", results_io.DECEPTION_TRIALS_HEADER, rows
        )
    }


# --- single solve ---------------------------------------------------------


def run_single_solve(config: ScenarioConfig, out_dir: Path) -> Dict[str, Path]:
    """One DWB and nulling solve at symbol 0, dumping signals and diagnostics."""
    bearings = deception_bearings(config)
    comm = config.constellation.random_symbols(
        trial_rng(config.seed, 0), (bearings.n_comm, config.grid.n_subcarriers)
    )
    problem = _problem(config, bearings, comm)
    dwb = solve_dwb(problem)
    nulling = solve_nulling(problem)
    diag = {
        "power_w": dwb.power_w,
        "relaxed_power_w": dwb.relaxed_power_w,
        "nulling_power_w": nulling.power_w,
        "symbol_power_w": dwb.symbol_power_w,
        "solver": asdict(dwb.solver_diag),
        "comm_deg": [math.degrees(a) for a in bearings.comm_angles_rad],
        "eve_deg": [math.degrees(a) for a in bearings.eve_angles_rad],
    }
    logging.info(
        "SOLVE dwb=%.6g relaxed=%.6g nulling=%.6g methods=%s",
        dwb.power_w,
        dwb.relaxed_power_w,
        nulling.power_w,
        dwb.solver_diag.methods,
    )
    return {
        "npz": results_io.save_npz(
            out_dir / "solve.npz",
            tx_signal=dwb.tx_signal,
            relaxed_tx_signal=dwb.relaxed_tx_signal,
            deceptive_symbols_relaxed=dwb.deceptive_symbols_relaxed,
            deceptive_symbols_rounded=dwb.deceptive_symbols_rounded,
            comm_targets=dwb.comm_targets,
            nulling_tx_signal=nulling.tx_signal,
        ),
        "json": results_io.write_json_atomic(out_dir / "solve.json", diag),
    }
