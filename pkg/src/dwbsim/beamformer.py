"""Deceptive beamforming solve, the nulling benchmark and transmit metrics."""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from dwbsim import signal_model
from dwbsim.errors import DomainError, SolverError
from dwbsim.models import (
    ArrayGeometry,
    Bearings,
    OfdmGrid,
    QamConstellation,
    SolverOptions,
    SpoofProfile,
)
from dwbsim.qp_core import (
    BoxQp,
    LeastNormProblem,
    QpSettings,
    QpSolution,
    check_full_row_rank,
    least_norm_solve,
    lift_matrix,
    lift_vector,
    solve_box_qp,
    unlift_vector,
)

EMITTED_RESIDUAL_TOL = 1e-8


def power_per_symbol(tx_snr_db: float, noise_var: float) -> float:
    """P_s = 10^(SNR/10) * sigma^2."""
    if not (noise_var > 0):
        raise DomainError(f"noise_var must be positive, got {noise_var!r}")
    if not math.isfinite(tx_snr_db):
        raise DomainError("tx_snr_db must be finite")
    return 10.0 ** (tx_snr_db / 10.0) * noise_var


def scale_comm_symbols(symbols: np.ndarray, symbol_power_w: float) -> np.ndarray:
    if not (symbol_power_w > 0):
        raise DomainError("symbol power must be positive")
    return np.asarray(symbols, dtype=complex) * math.sqrt(symbol_power_w)


def deceptive_box_bound(constellation: QamConstellation) -> float:
    """Per-axis bound on the relaxed deceptive symbols.

    At least sqrt(P_s), widened to the outermost level for dense
    constellations so every QAM point stays feasible.
    """
    return math.sqrt(constellation.symbol_power_w) * max(1.0, float(constellation.unit_levels[-1]))


def tx_power(tx_signal: np.ndarray) -> float:
    s = np.asarray(tx_signal, dtype=complex)
    return float(np.vdot(s, s).real)


def tx_snr_toward(
    tx_signal: np.ndarray, geometry: ArrayGeometry, angle_rad: float, noise_var: float
) -> float:
    """Transmit SNR ||S^T a(theta)||^2 / sigma^2 toward one bearing."""
    if not (noise_var > 0):
        raise DomainError("noise_var must be positive")
    beam = np.asarray(tx_signal, dtype=complex).T @ signal_model.steering_vector(geometry, angle_rad)
    return float(np.vdot(beam, beam).real) / noise_var


@dataclass(frozen=True)
class DwbProblem:
    geometry: ArrayGeometry
    bearings: Bearings
    grid: OfdmGrid
    constellation: QamConstellation
    spoof: SpoofProfile
    comm_symbols: np.ndarray
    tx_snr_db: float = 10.0
    noise_var: float = 1.0
    symbol_index: int = 0
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self) -> None:
        x_c = np.asarray(self.comm_symbols, dtype=complex)
        if x_c.size == 0:
            x_c = x_c.reshape(self.bearings.n_comm, self.grid.n_subcarriers)
        x_c = np.atleast_2d(x_c)
        if x_c.shape != (self.bearings.n_comm, self.grid.n_subcarriers):
            raise DomainError(
                f"comm symbols have shape {x_c.shape}, expected "
                f"({self.bearings.n_comm}, {self.grid.n_subcarriers})"
            )
        object.__setattr__(self, "comm_symbols", x_c)
        if not (0 <= self.symbol_index < self.grid.n_symbols):
            raise DomainError(f"symbol_index {self.symbol_index} outside [0, {self.grid.n_symbols})")

    @property
    def n_comm(self) -> int:
        return self.bearings.n_comm

    @property
    def n_eve(self) -> int:
        return self.bearings.n_eve

    def at_symbol(self, m: int, comm_symbols: Optional[np.ndarray] = None) -> "DwbProblem":
        return replace(
            self,
            symbol_index=m,
            comm_symbols=self.comm_symbols if comm_symbols is None else comm_symbols,
        )


@dataclass
class SolverSummary:
    n_problems: int = 0
    total_iterations: int = 0
    max_iterations: int = 0
    converged: bool = True
    methods: Dict[str, int] = field(default_factory=dict)
    max_equality_residual: float = 0.0
    comm_residual_rel: float = 0.0
    eve_residual_rel: float = 0.0

    @classmethod
    def from_solutions(cls, solutions: List[QpSolution]) -> "SolverSummary":
        if not solutions:
            return cls()
        return cls(
            n_problems=len(solutions),
            total_iterations=sum(s.iterations for s in solutions),
            max_iterations=max(s.iterations for s in solutions),
            converged=all(s.converged for s in solutions),
            methods=dict(Counter(s.method for s in solutions)),
            max_equality_residual=max(s.equality_residual for s in solutions),
        )


@dataclass
class DwbSolution:
    tx_signal: np.ndarray
    deceptive_symbols_relaxed: np.ndarray
    deceptive_symbols_rounded: np.ndarray
    power_w: float
    relaxed_power_w: float
    solver_diag: SolverSummary
    relaxed_tx_signal: np.ndarray
    comm_targets: np.ndarray
    eve_targets: np.ndarray
    symbol_power_w: float


@dataclass
class NullingSolution:
    tx_signal: np.ndarray
    power_w: float


@dataclass(frozen=True)
class _Prepared:
    steering: np.ndarray
    labels: Tuple[str, ...]
    a_eve: np.ndarray
    a_comm: np.ndarray
    comm_targets: np.ndarray
    constellation: QamConstellation
    symbol_power_w: float


def _labels(bearings: Bearings) -> Tuple[str, ...]:
    eve = [f"eve{i}@{math.degrees(a):.2f}deg" for i, a in enumerate(bearings.eve_angles_rad)]
    comm = [f"comm{i}@{math.degrees(a):.2f}deg" for i, a in enumerate(bearings.comm_angles_rad)]
    return tuple(eve + comm)


def _prepare(problem: DwbProblem) -> _Prepared:
    n_t = problem.geometry.n_antennas
    if n_t <= problem.n_comm + problem.n_eve:
        raise DomainError(
            f"N_T={n_t} must exceed N_c+N_e={problem.n_comm + problem.n_eve} "
            "for an under-determined system"
        )
    p_s = power_per_symbol(problem.tx_snr_db, problem.noise_var)
    a_eve = signal_model.steering_matrix(problem.geometry, problem.bearings.eve_angles_rad)
    a_comm = signal_model.steering_matrix(problem.geometry, problem.bearings.comm_angles_rad)
    steering = np.vstack([a_eve, a_comm])
    labels = _labels(problem.bearings)
    check_full_row_rank(steering, labels)
    x_c = scale_comm_symbols(problem.comm_symbols, p_s)
    return _Prepared(
        steering=steering,
        labels=labels,
        a_eve=a_eve,
        a_comm=a_comm,
        comm_targets=signal_model.ofdm_modulate(x_c),
        constellation=problem.constellation.scaled(p_s),
        symbol_power_w=p_s,
    )


def _least_norm(prep: _Prepared, eve_targets: np.ndarray) -> np.ndarray:
    targets = np.vstack([eve_targets, prep.comm_targets])
    return least_norm_solve(LeastNormProblem(prep.steering, targets, prep.labels))


def _qp_settings(options: SolverOptions) -> QpSettings:
    return QpSettings(
        tol=options.tol,
        max_iter=options.max_iter,
        rho=options.rho,
        polish=options.polish,
        method=options.qp_method,
    )


def _relaxed_per_subcarrier(
    problem: DwbProblem, prep: _Prepared
) -> Tuple[np.ndarray, np.ndarray, List[QpSolution]]:
    """One small QP per subcarrier in the rotated variable S' = S F."""
    n_t, n_e, n_c = problem.geometry.n_antennas, problem.n_eve, problem.n_comm
    n_sub = problem.grid.n_subcarriers
    h = signal_model.spoof_matrix_diag(problem.grid, problem.spoof, problem.symbol_index)
    x_c = scale_comm_symbols(problem.comm_symbols, prep.symbol_power_w)
    bound = deceptive_box_bound(prep.constellation)
    settings = _qp_settings(problem.options)

    free_part = lift_matrix(np.vstack([prep.a_eve, prep.a_comm]))
    rotated = np.zeros((n_t, n_sub), dtype=complex)
    x_e = np.zeros((n_e, n_sub), dtype=complex)
    solutions = []
    for ell in range(n_sub):
        boxed = np.vstack([-h[ell] * np.eye(n_e), np.zeros((n_c, n_e))])
        lhs = np.hstack([free_part, lift_matrix(boxed)])
        rhs = lift_vector(np.concatenate([np.zeros(n_e), x_c[:, ell]]))
        sol = solve_box_qp(BoxQp(2 * n_t, 2 * n_e, lhs, rhs, bound), settings=settings)
        rotated[:, ell] = unlift_vector(sol.free_block)
        x_e[:, ell] = unlift_vector(sol.boxed_block)
        solutions.append(sol)
    return signal_model.ofdm_modulate(rotated), x_e, solutions


def _relaxed_joint(
    problem: DwbProblem, prep: _Prepared
) -> Tuple[np.ndarray, np.ndarray, List[QpSolution]]:
    """Single QP over (vec S, vec X_e), column-major vectorization."""
    n_t, n_e, n_c = problem.geometry.n_antennas, problem.n_eve, problem.n_comm
    n_sub = problem.grid.n_subcarriers
    h = signal_model.spoof_matrix_diag(problem.grid, problem.spoof, problem.symbol_index)
    weights = h[:, None] * signal_model.idft_matrix(n_sub)
    eye_sub = np.eye(n_sub)
    eve_rows = np.hstack([np.kron(eye_sub, prep.a_eve), -np.kron(weights.T, np.eye(n_e))])
    comm_rows = np.hstack([np.kron(eye_sub, prep.a_comm), np.zeros((n_c * n_sub, n_e * n_sub))])
    lhs_c = np.vstack([eve_rows, comm_rows])
    rhs_c = np.concatenate([np.zeros(n_e * n_sub), prep.comm_targets.reshape(-1, order="F")])

    k_s, k_x = n_t * n_sub, n_e * n_sub
    lhs = np.hstack([lift_matrix(lhs_c[:, :k_s]), lift_matrix(lhs_c[:, k_s:])])
    qp = BoxQp(2 * k_s, 2 * k_x, lhs, lift_vector(rhs_c), deceptive_box_bound(prep.constellation))
    sol = solve_box_qp(qp, settings=_qp_settings(problem.options))
    s = unlift_vector(sol.free_block).reshape(n_t, n_sub, order="F")
    x_e = unlift_vector(sol.boxed_block).reshape(n_e, n_sub, order="F")
    return s, x_e, [sol]


def _relative_residual(a: np.ndarray, s: np.ndarray, d: np.ndarray) -> float:
    if a.shape[0] == 0:
        return 0.0
    return float(np.linalg.norm(a @ s - d) / max(np.linalg.norm(d), 1e-300))


def solve_dwb(problem: DwbProblem) -> DwbSolution:
    """Relaxed QP, QAM rounding and least-norm re-solve for one OFDM symbol."""
    prep = _prepare(problem)
    n_sub = problem.grid.n_subcarriers

    if problem.n_eve == 0:
        s = _least_norm(prep, np.zeros((0, n_sub), dtype=complex))
        power = tx_power(s)
        empty = np.zeros((0, n_sub), dtype=complex)
        return DwbSolution(
            tx_signal=s,
            deceptive_symbols_relaxed=empty,
            deceptive_symbols_rounded=empty.copy(),
            power_w=power,
            relaxed_power_w=power,
            solver_diag=SolverSummary(
                comm_residual_rel=_relative_residual(prep.a_comm, s, prep.comm_targets)
            ),
            relaxed_tx_signal=s,
            comm_targets=prep.comm_targets,
            eve_targets=empty.copy(),
            symbol_power_w=prep.symbol_power_w,
        )

    if problem.options.decompose:
        relaxed_s, x_relaxed, solutions = _relaxed_per_subcarrier(problem, prep)
    else:
        relaxed_s, x_relaxed, solutions = _relaxed_joint(problem, prep)
    summary = SolverSummary.from_solutions(solutions)
    if not summary.converged:
        logging.warning("relaxed solve did not converge on every subproblem: %s", summary.methods)

    x_rounded = signal_model.qam_nearest(x_relaxed, prep.constellation)
    if problem.options.resolve_after_rounding:
        eve_targets = signal_model.deceptive_time_signal(
            problem.grid, problem.spoof, x_rounded, problem.symbol_index
        )
        s = _least_norm(prep, eve_targets)
    else:
        s = relaxed_s
        eve_targets = prep.a_eve @ relaxed_s

    summary.comm_residual_rel = _relative_residual(prep.a_comm, s, prep.comm_targets)
    summary.eve_residual_rel = _relative_residual(prep.a_eve, s, eve_targets)
    if summary.comm_residual_rel > EMITTED_RESIDUAL_TOL:
        raise SolverError(f"comm constraint residual {summary.comm_residual_rel:.3e} too large")

    logging.debug(
        "DWB m=%d N_T=%d N_c=%d N_e=%d relaxed=%.6g emitted=%.6g methods=%s",
        problem.symbol_index,
        problem.geometry.n_antennas,
        problem.n_comm,
        problem.n_eve,
        tx_power(relaxed_s),
        tx_power(s),
        summary.methods,
    )
    return DwbSolution(
        tx_signal=s,
        deceptive_symbols_relaxed=x_relaxed,
        deceptive_symbols_rounded=x_rounded,
        power_w=tx_power(s),
        relaxed_power_w=tx_power(relaxed_s),
        solver_diag=summary,
        relaxed_tx_signal=relaxed_s,
        comm_targets=prep.comm_targets,
        eve_targets=eve_targets,
        symbol_power_w=prep.symbol_power_w,
    )


def solve_nulling(problem: DwbProblem) -> NullingSolution:
    """Least-norm solve that serves the comm receivers and sends nothing toward eavesdroppers."""
    prep = _prepare(problem)
    s = _least_norm(prep, np.zeros((problem.n_eve, problem.grid.n_subcarriers), dtype=complex))
    return NullingSolution(tx_signal=s, power_w=tx_power(s))


def solve_with_deceptive_symbols(problem: DwbProblem, deceptive_symbols: np.ndarray) -> np.ndarray:
    """Least-norm S for fixed (already scaled) deceptive symbols X_e."""
    prep = _prepare(problem)
    eve_targets = signal_model.deceptive_time_signal(
        problem.grid, problem.spoof, deceptive_symbols, problem.symbol_index
    )
    return _least_norm(prep, eve_targets)


def exhaustive_dwb_power(
    problem: DwbProblem, max_combinations: int = 1 << 16
) -> Tuple[float, np.ndarray]:
    """Minimum emitted power over every discrete X_e choice (tiny instances only)."""
    prep = _prepare(problem)
    n_e, n_sub = problem.n_eve, problem.grid.n_subcarriers
    points = prep.constellation.points
    n_entries = n_e * n_sub
    if points.size ** n_entries > max_combinations:
        raise DomainError(
            f"{points.size}^{n_entries} combinations exceed the limit of {max_combinations}"
        )
    h = signal_model.spoof_matrix_diag(problem.grid, problem.spoof, problem.symbol_index)
    best_power, best_x = np.inf, np.zeros((n_e, n_sub), dtype=complex)
    for combo in itertools.product(points, repeat=n_entries):
        x_e = np.asarray(combo, dtype=complex).reshape(n_e, n_sub)
        s = _least_norm(prep, signal_model.ofdm_modulate(x_e * h[None, :]))
        power = tx_power(s)
        if power < best_power:
            best_power, best_x = power, x_e
    return float(best_power), best_x
