"""Numerical core: real lifting, least-norm solves and the box-constrained QP.

The box QP minimizes ``||u||^2`` over ``z = [u; y]`` subject to ``E z = r`` and
``|y_i| <= b``. It is solved by a direct KKT factorization when the box is
inactive. Otherwise, when the free block alone has full row rank, ``u`` is
eliminated in closed form and the boxed block is found by bounded-variable
least squares; the OSQP-style ADMM with active-set polishing covers the rest.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.optimize

from dwbsim.errors import DomainError, InfeasibleError, RankDeficiencyError, SolverError

RANK_TOL = 1e-10
LEAST_NORM_RESIDUAL_TOL = 1e-9
QP_METHODS = ("auto", "admm")


def lift_matrix(a: np.ndarray) -> np.ndarray:
    """[[Re A, -Im A], [Im A, Re A]]."""
    a = np.asarray(a, dtype=complex)
    return np.block([[a.real, -a.imag], [a.imag, a.real]])


def lift_vector(b: np.ndarray) -> np.ndarray:
    """[Re b; Im b] stacked along the first axis (vectors or column blocks)."""
    b = np.asarray(b, dtype=complex)
    return np.concatenate([b.real, b.imag], axis=0)


def unlift_vector(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[0] % 2:
        raise DomainError(f"lifted vector has odd length {v.shape[0]}")
    half = v.shape[0] // 2
    return v[:half] + 1j * v[half:]


def lift_to_real(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Map the complex system A z = b onto its real embedding."""
    return lift_matrix(a), lift_vector(b)


def _singular_values(matrix: np.ndarray) -> np.ndarray:
    if matrix.size == 0:
        return np.zeros(0)
    return scipy.linalg.svdvals(matrix)


def _is_rank_deficient(sv: np.ndarray, n_rows: int, rank_tol: float) -> bool:
    if n_rows == 0:
        return False
    if sv.size < n_rows or sv[0] == 0.0:
        return True
    return bool(sv[-1] <= rank_tol * sv[0])


def _most_correlated_pair(matrix: np.ndarray, labels: Sequence[str]) -> Tuple[str, ...]:
    norms = np.linalg.norm(matrix, axis=1)
    if matrix.shape[0] < 2:
        return (labels[0],)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        return (labels[int(zero[0])],)
    unit = matrix / norms[:, None]
    corr = np.abs(unit @ unit.conj().T)
    np.fill_diagonal(corr, -1.0)
    i, j = np.unravel_index(int(np.argmax(corr)), corr.shape)
    return (labels[min(i, j)], labels[max(i, j)])


@dataclass(frozen=True)
class LeastNormProblem:
    """A S = D with A (N x K) wide and one least-norm solve per column of D."""

    constraint_matrix: np.ndarray
    targets: np.ndarray
    row_labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self) -> None:
        a = np.atleast_2d(np.asarray(self.constraint_matrix, dtype=complex))
        d = np.asarray(self.targets, dtype=complex)
        if d.ndim == 1:
            d = d[:, None]
        if d.shape[0] != a.shape[0]:
            raise DomainError(f"targets have {d.shape[0]} rows, constraint matrix has {a.shape[0]}")
        object.__setattr__(self, "constraint_matrix", a)
        object.__setattr__(self, "targets", d)
        if self.row_labels is None:
            object.__setattr__(self, "row_labels", tuple(f"row{i}" for i in range(a.shape[0])))
        elif len(self.row_labels) != a.shape[0]:
            raise DomainError("row_labels length does not match the constraint matrix")

    @property
    def n_rows(self) -> int:
        return self.constraint_matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.constraint_matrix.shape[1]


def check_full_row_rank(
    matrix: np.ndarray, labels: Optional[Sequence[str]] = None, rank_tol: float = RANK_TOL
) -> None:
    """Raise RankDeficiencyError naming the most correlated rows when A is not full row rank."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
    n_rows, n_cols = matrix.shape
    labels = tuple(labels) if labels is not None else tuple(f"row{i}" for i in range(n_rows))
    if n_rows > n_cols:
        raise RankDeficiencyError(
            f"{n_rows} constraints exceed {n_cols} unknowns; rows cannot be independent"
        )
    sv = _singular_values(matrix)
    if _is_rank_deficient(sv, n_rows, rank_tol):
        pair = _most_correlated_pair(matrix, labels)
        cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else float("inf")
        raise RankDeficiencyError(
            f"constraint matrix is rank deficient (condition {cond:.3g}); "
            f"conflicting rows: {', '.join(pair)}",
            pair=pair,
        )


def least_norm_solve(problem: LeastNormProblem, rank_tol: float = RANK_TOL) -> np.ndarray:
    """S = A^H (A A^H)^-1 D computed through a QR factorization of A^H."""
    a, d = problem.constraint_matrix, problem.targets
    if problem.n_rows == 0:
        return np.zeros((problem.n_cols, d.shape[1]), dtype=complex)
    check_full_row_rank(a, problem.row_labels, rank_tol)
    q, r = scipy.linalg.qr(a.conj().T, mode="economic")
    # A = R^H Q^H, so A (Q w) = R^H w
    w = scipy.linalg.solve_triangular(r, d, trans="C")
    s = q @ w
    residual = float(np.linalg.norm(a @ s - d))
    scale = float(np.linalg.norm(d))
    if residual > LEAST_NORM_RESIDUAL_TOL * scale:
        raise SolverError(f"least-norm residual {residual:.3e} exceeds tolerance (|D|={scale:.3e})")
    return s


@dataclass(frozen=True)
class BoxQp:
    """min ||z[:dim_free]||^2  s.t.  E z = r,  |z[dim_free:]| <= box_bound."""

    dim_free: int
    dim_boxed: int
    equality_lhs: np.ndarray
    equality_rhs: np.ndarray
    box_bound: float

    def __post_init__(self) -> None:
        lhs = np.atleast_2d(np.asarray(self.equality_lhs, dtype=float))
        rhs = np.asarray(self.equality_rhs, dtype=float).reshape(-1)
        if self.dim_free < 0 or self.dim_boxed < 0:
            raise DomainError("block dimensions must be nonnegative")
        if lhs.shape[1] != self.dim_free + self.dim_boxed:
            raise DomainError(
                f"equality matrix has {lhs.shape[1]} columns, "
                f"expected {self.dim_free + self.dim_boxed}"
            )
        if rhs.size != lhs.shape[0]:
            raise DomainError(f"equality rhs has {rhs.size} entries, expected {lhs.shape[0]}")
        if not (self.box_bound > 0):
            raise DomainError(f"box_bound must be positive, got {self.box_bound!r}")
        object.__setattr__(self, "equality_lhs", lhs)
        object.__setattr__(self, "equality_rhs", rhs)

    @property
    def n_vars(self) -> int:
        return self.dim_free + self.dim_boxed

    @property
    def n_eq(self) -> int:
        return self.equality_lhs.shape[0]

    @property
    def lhs_free(self) -> np.ndarray:
        return self.equality_lhs[:, : self.dim_free]

    @property
    def lhs_boxed(self) -> np.ndarray:
        return self.equality_lhs[:, self.dim_free :]

    def hessian_diag(self) -> np.ndarray:
        return np.concatenate([np.full(self.dim_free, 2.0), np.zeros(self.dim_boxed)])


@dataclass
class QpSettings:
    tol: float = 1e-8
    max_iter: int = 5000
    rho: float = 1.0
    sigma: float = 1e-6
    alpha: float = 1.6
    eq_rho_scale: float = 1e3
    polish: bool = True
    polish_every: int = 25
    adapt_every: int = 50
    rank_tol: float = RANK_TOL
    method: str = "auto"


@dataclass
class QpSolution:
    free_block: np.ndarray
    boxed_block: np.ndarray
    objective: float
    equality_residual: float
    iterations: int
    converged: bool
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    box_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    method: str = "kkt"

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.free_block, self.boxed_block])


def _solve_dense(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.solve(matrix, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, ValueError):
        logging.debug("KKT matrix singular; falling back to lstsq")
        return scipy.linalg.lstsq(matrix, rhs)[0]


def _kkt_solve(
    problem: BoxQp, fixed: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Solve the equality-constrained problem; ``fixed`` holds boxed values pinned (NaN = free)."""
    n, m = problem.n_vars, problem.n_eq
    keep = np.ones(n, dtype=bool)
    rhs_eq = problem.equality_rhs.copy()
    z = np.zeros(n)
    if fixed is not None:
        pinned = ~np.isnan(fixed)
        idx = problem.dim_free + np.flatnonzero(pinned)
        keep[idx] = False
        z[idx] = fixed[pinned]
        rhs_eq = rhs_eq - problem.equality_lhs[:, idx] @ fixed[pinned]
    e = problem.equality_lhs[:, keep]
    h = problem.hessian_diag()[keep]
    k = e.shape[1]
    kkt = np.zeros((k + m, k + m))
    kkt[:k, :k] = np.diag(h)
    kkt[:k, k:] = e.T
    kkt[k:, :k] = e
    sol = _solve_dense(kkt, np.concatenate([np.zeros(k), rhs_eq]))
    z[keep] = sol[:k]
    return z, sol[k:]


def _finish(
    problem: BoxQp,
    z: np.ndarray,
    nu: np.ndarray,
    iterations: int,
    converged: bool,
    method: str,
) -> QpSolution:
    u = z[: problem.dim_free]
    y = z[problem.dim_free :]
    residual = float(np.linalg.norm(problem.equality_lhs @ z - problem.equality_rhs))
    return QpSolution(
        free_block=u.copy(),
        boxed_block=y.copy(),
        objective=float(u @ u),
        equality_residual=residual,
        iterations=iterations,
        converged=converged,
        multipliers=np.asarray(nu, dtype=float).copy(),
        box_multipliers=-(problem.lhs_boxed.T @ nu),
        method=method,
    )


def _repair(problem: BoxQp, z: np.ndarray) -> np.ndarray:
    """Clip the boxed block and restore E z = r by a least-norm correction of the free block."""
    z = z.copy()
    b = problem.box_bound
    z[problem.dim_free :] = np.clip(z[problem.dim_free :], -b, b)
    if problem.dim_free == 0 or problem.n_eq == 0:
        return z
    gap = problem.equality_rhs - problem.equality_lhs @ z
    z[: problem.dim_free] += scipy.linalg.lstsq(problem.lhs_free, gap)[0]
    return z


def _free_block_qr(problem: BoxQp, rank_tol: float) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Economic QR of E_u^T, or None when the free block cannot meet E z = r on its own."""
    if problem.dim_free < problem.n_eq:
        return None
    if _is_rank_deficient(_singular_values(problem.lhs_free), problem.n_eq, rank_tol):
        return None
    return scipy.linalg.qr(problem.lhs_free.T, mode="economic")


def _reduced_solve(
    problem: BoxQp, factor: Tuple[np.ndarray, np.ndarray]
) -> Optional[Tuple[np.ndarray, np.ndarray, int]]:
    """Eliminate u and solve the bounded least-squares problem in y.

    With E_u^T = Q R the least-norm free block for a fixed y is
    u = Q R^-T (r - E_y y), so ||u||^2 = ||R^-T r - R^-T E_y y||^2.
    """
    q, r = factor
    b = problem.box_bound
    design = scipy.linalg.solve_triangular(r, problem.lhs_boxed, trans="T")
    target = scipy.linalg.solve_triangular(r, problem.equality_rhs, trans="T")
    result = scipy.optimize.lsq_linear(design, target, bounds=(-b, b), method="bvls")
    if result.status <= 0:
        logging.debug("bounded least squares stopped with status %d", result.status)
        return None
    z = np.zeros(problem.n_vars)
    y = np.clip(result.x, -b, b)
    t = scipy.linalg.solve_triangular(
        r, problem.equality_rhs - problem.lhs_boxed @ y, trans="T"
    )
    z[: problem.dim_free] = q @ t
    z[problem.dim_free :] = y
    # stationarity in u: 2 u + E_u^T nu = 0
    nu = -2.0 * scipy.linalg.solve_triangular(r, t)
    return z, nu, int(result.nit)


def _try_polish(
    problem: BoxQp, upper: np.ndarray, lower: np.ndarray, tol: float
) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Solve with the guessed active set pinned; return it only if it is a KKT point."""
    b = problem.box_bound
    fixed = np.full(problem.dim_boxed, np.nan)
    fixed[upper] = b
    fixed[lower] = -b
    z, nu = _kkt_solve(problem, fixed)
    y = z[problem.dim_free :]
    inactive = ~(upper | lower)
    if np.any(np.abs(y[inactive]) > b * (1.0 + 1e-10)):
        return None
    mu = -(problem.lhs_boxed.T @ nu)
    mu_tol = tol * max(1.0, float(np.max(np.abs(nu), initial=0.0)))
    if np.any(mu[upper] < -mu_tol) or np.any(mu[lower] > mu_tol):
        return None
    residual = np.linalg.norm(problem.equality_lhs @ z - problem.equality_rhs)
    if residual > tol * max(1.0, float(np.linalg.norm(problem.equality_rhs))):
        return None
    z[problem.dim_free :] = np.clip(y, -b, b)
    return z, nu


class _Admm:
    """OSQP iteration on  l <= C x <= u  with C = [E; boxed selector]."""

    def __init__(self, problem: BoxQp, settings: QpSettings) -> None:
        self.problem = problem
        self.settings = settings
        n, m = problem.n_vars, problem.n_eq
        selector = np.zeros((problem.dim_boxed, n))
        selector[:, problem.dim_free :] = np.eye(problem.dim_boxed)
        self.c = np.vstack([problem.equality_lhs, selector])
        b = problem.box_bound
        self.lower = np.concatenate([problem.equality_rhs, np.full(problem.dim_boxed, -b)])
        self.upper = np.concatenate([problem.equality_rhs, np.full(problem.dim_boxed, b)])
        self.p_diag = problem.hessian_diag()
        self.n_eq = m
        self.rho = settings.rho
        self._factor()

    def _rho_vec(self) -> np.ndarray:
        scale = np.ones(self.c.shape[0])
        scale[: self.n_eq] = self.settings.eq_rho_scale
        return self.rho * scale

    def _factor(self) -> None:
        self.rho_vec = self._rho_vec()
        k = np.diag(self.p_diag + self.settings.sigma) + self.c.T @ (self.rho_vec[:, None] * self.c)
        self.factor = scipy.linalg.cho_factor(k)

    def residuals(self, x, w, lam) -> Tuple[float, float, float, float]:
        cx = self.c @ x
        px = self.p_diag * x
        clam = self.c.T @ lam
        r_prim = float(np.max(np.abs(cx - w), initial=0.0))
        r_dual = float(np.max(np.abs(px + clam), initial=0.0))
        prim_scale = max(float(np.max(np.abs(cx), initial=0.0)), float(np.max(np.abs(w), initial=0.0)))
        dual_scale = max(
            float(np.max(np.abs(px), initial=0.0)), float(np.max(np.abs(clam), initial=0.0))
        )
        return r_prim, r_dual, prim_scale, dual_scale

    def step(self, x, w, lam):
        s = self.settings
        rhs = s.sigma * x + self.c.T @ (self.rho_vec * w - lam)
        x_tilde = scipy.linalg.cho_solve(self.factor, rhs)
        z_tilde = self.c @ x_tilde
        x_new = s.alpha * x_tilde + (1.0 - s.alpha) * x
        v = s.alpha * z_tilde + (1.0 - s.alpha) * w + lam / self.rho_vec
        w_new = np.clip(v, self.lower, self.upper)
        lam_new = self.rho_vec * (v - w_new)
        return x_new, w_new, lam_new

    def rescale(self, r_prim, r_dual, prim_scale, dual_scale) -> bool:
        prim_rel = r_prim / max(prim_scale, 1e-30)
        dual_rel = r_dual / max(dual_scale, 1e-30)
        if prim_rel > 10.0 * dual_rel and self.rho < 1e6:
            self.rho *= 10.0
        elif dual_rel > 10.0 * prim_rel and self.rho > 1e-6:
            self.rho /= 10.0
        else:
            return False
        self._factor()
        return True


def solve_box_qp(
    problem: BoxQp,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    settings: Optional[QpSettings] = None,
) -> QpSolution:
    """Solve the box-constrained least-power QP.

    Raises InfeasibleError when the equality rows are dependent. When the
    ADMM path exhausts ``max_iter`` the best iterate is returned with
    ``converged=False``.
    """
    settings = settings or QpSettings()
    if tol is not None or max_iter is not None:
        settings = replace(
            settings,
            tol=settings.tol if tol is None else tol,
            max_iter=settings.max_iter if max_iter is None else max_iter,
        )
    if settings.method not in QP_METHODS:
        raise DomainError(f"QP method must be one of {QP_METHODS}, got {settings.method!r}")
    if problem.n_eq == 0:
        return _finish(problem, np.zeros(problem.n_vars), np.zeros(0), 0, True, "kkt")

    sv = _singular_values(problem.equality_lhs)
    if _is_rank_deficient(sv, problem.n_eq, settings.rank_tol):
        raise InfeasibleError(
            f"equality system is rank deficient ({problem.n_eq} rows, rank tolerance "
            f"{settings.rank_tol:g}); consistency cannot be guaranteed"
        )

    z, nu = _kkt_solve(problem)
    b = problem.box_bound
    y = z[problem.dim_free :]
    if np.all(np.abs(y) <= b):
        return _finish(problem, z, nu, 0, True, "kkt")

    if settings.method == "auto":
        factor = _free_block_qr(problem, settings.rank_tol)
        reduced = _reduced_solve(problem, factor) if factor is not None else None
        if reduced is not None:
            return _finish(problem, reduced[0], reduced[1], reduced[2], True, "bvls")
        logging.debug("reduced solve unavailable; using polish/ADMM")

    if settings.polish:
        polished = _try_polish(problem, y > b, y < -b, settings.tol)
        if polished is not None:
            return _finish(problem, polished[0], polished[1], 0, True, "polish")

    logging.debug(
        "box active on %d of %d components; running ADMM",
        int(np.count_nonzero(np.abs(y) > b)),
        problem.dim_boxed,
    )
    admm = _Admm(problem, settings)
    x = z.copy()
    x[problem.dim_free :] = np.clip(y, -b, b)
    w = np.concatenate([problem.equality_rhs, x[problem.dim_free :]])
    lam = np.concatenate([nu, np.zeros(problem.dim_boxed)])

    best = (np.inf, x.copy(), lam.copy())
    eps = settings.tol
    for it in range(1, settings.max_iter + 1):
        x, w, lam = admm.step(x, w, lam)
        r_prim, r_dual, prim_scale, dual_scale = admm.residuals(x, w, lam)
        eps_prim = eps + eps * prim_scale
        eps_dual = eps + eps * dual_scale
        score = max(r_prim / eps_prim, r_dual / eps_dual)
        if score < best[0]:
            best = (score, x.copy(), lam.copy())
        converged = score <= 1.0

        if settings.polish and (converged or it % settings.polish_every == 0):
            v = w[problem.n_eq :] + lam[problem.n_eq :] / admm.rho_vec[problem.n_eq :]
            polished = _try_polish(problem, v >= b, v <= -b, settings.tol)
            if polished is not None:
                logging.debug("ADMM polished after %d iterations", it)
                return _finish(problem, polished[0], polished[1], it, True, "polish")
        if converged:
            z_out = _repair(problem, x)
            return _finish(problem, z_out, lam[: problem.n_eq], it, True, "admm")
        if it % settings.adapt_every == 0 and admm.rescale(r_prim, r_dual, prim_scale, dual_scale):
            logging.debug("ADMM rho rescaled to %.3g at iteration %d", admm.rho, it)

    logging.warning(
        "ADMM hit max_iter=%d without converging (best score %.3g)", settings.max_iter, best[0]
    )
    z_out = _repair(problem, best[1])
    return _finish(problem, z_out, best[2][: problem.n_eq], settings.max_iter, False, "admm")


def kkt_residual(problem: BoxQp, solution: QpSolution) -> Tuple[float, float, float]:
    """(stationarity, primal, box_violation) norms for a candidate solution."""
    u, y = solution.free_block, solution.boxed_block
    nu = solution.multipliers
    if nu.size != problem.n_eq:
        nu = np.zeros(problem.n_eq)
    z = np.concatenate([u, y])
    b = problem.box_bound

    grad_free = 2.0 * u + problem.lhs_free.T @ nu
    g = problem.lhs_boxed.T @ nu
    at_upper = np.isclose(y, b, rtol=1e-9, atol=1e-12)
    at_lower = np.isclose(y, -b, rtol=1e-9, atol=1e-12)
    interior = ~(at_upper | at_lower)
    # boxed stationarity: g + mu = 0 with mu >= 0 at the upper bound, <= 0 at the lower
    boxed = np.where(interior, np.abs(g), 0.0)
    boxed = np.where(at_upper, np.maximum(g, 0.0), boxed)
    boxed = np.where(at_lower, np.maximum(-g, 0.0), boxed)
    stationarity = float(np.sqrt(grad_free @ grad_free + boxed @ boxed))

    primal = float(np.linalg.norm(problem.equality_lhs @ z - problem.equality_rhs))
    excess = np.maximum(np.abs(y) - b, 0.0)
    box_violation = float(np.max(excess, initial=0.0))
    return stationarity, primal, box_violation


def grid_search_box_qp(problem: BoxQp, points: int = 41) -> Tuple[float, np.ndarray]:
    """Brute-force oracle: scan a uniform grid over the box, free block in closed form."""
    if problem.dim_boxed > 4:
        raise DomainError("grid search is limited to at most 4 boxed variables")
    b = problem.box_bound
    if not np.isfinite(b):
        raise DomainError("grid search needs a finite box")
    pinv = np.linalg.pinv(problem.lhs_free)
    axis = np.linspace(-b, b, points)
    grid = np.array(list(itertools.product(axis, repeat=problem.dim_boxed)), dtype=float)
    gaps = problem.equality_rhs[None, :] - grid @ problem.lhs_boxed.T
    u = gaps @ pinv.T
    feasible = np.linalg.norm(u @ problem.lhs_free.T - gaps, axis=1) <= 1e-9 * max(
        1.0, float(np.linalg.norm(problem.equality_rhs))
    )
    if not np.any(feasible):
        raise InfeasibleError("no grid point admits a feasible free block")
    objectives = np.where(feasible, np.sum(u * u, axis=1), np.inf)
    best = int(np.argmin(objectives))
    return float(objectives[best]), grid[best]
