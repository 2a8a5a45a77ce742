import math

import numpy as np
import pytest
import scipy.linalg

from dwbsim import signal_model
from dwbsim.errors import DomainError, InfeasibleError, RankDeficiencyError
from dwbsim.models import ArrayGeometry
from dwbsim.qp_core import (
    BoxQp,
    LeastNormProblem,
    QpSettings,
    check_full_row_rank,
    grid_search_box_qp,
    kkt_residual,
    least_norm_solve,
    lift_matrix,
    lift_to_real,
    lift_vector,
    solve_box_qp,
    unlift_vector,
)


def _complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _grid_instance(seed: int) -> BoxQp:
    """dim_free=4, dim_boxed=2, 3 equalities; unboxed optimum sits outside the unit box."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    e_free = q[:3]
    e_boxed = 0.2 * rng.standard_normal((3, 2))
    rhs = e_boxed @ np.array([2.5, -1.8])
    return BoxQp(4, 2, np.hstack([e_free, e_boxed]), rhs, 1.0)


# --- lifting --------------------------------------------------------------


def test_lift_scalar_system():
    a, b = lift_to_real(np.array([[1.0 + 0j]]), np.array([2.0 + 3.0j]))
    assert np.allclose(np.linalg.solve(a, b), [2.0, 3.0])


def test_lift_of_real_matrix_is_block_diagonal(rng):
    a = rng.standard_normal((2, 3))
    lifted = lift_matrix(a)
    assert np.array_equal(lifted[:2, 3:], np.zeros((2, 3)))
    assert np.array_equal(lifted[2:, :3], np.zeros((2, 3)))
    assert np.array_equal(lifted[:2, :3], lifted[2:, 3:])


def test_lifted_solution_solves_complex_system(rng):
    a = _complex(rng, 3, 5)
    b = _complex(rng, 3)
    lifted_a, lifted_b = lift_to_real(a, b)
    z = unlift_vector(np.linalg.lstsq(lifted_a, lifted_b, rcond=None)[0])
    assert np.linalg.norm(a @ z - b) < 1e-10
    assert np.array_equal(unlift_vector(lift_vector(b)), b)


def test_unlift_rejects_odd_length():
    with pytest.raises(DomainError):
        unlift_vector(np.ones(3))


# --- least norm -----------------------------------------------------------


def test_least_norm_identity_returns_targets(rng):
    d = _complex(rng, 4, 3)
    assert np.allclose(least_norm_solve(LeastNormProblem(np.eye(4), d)), d, atol=1e-13)


def test_least_norm_single_steering_row_closed_form(rng):
    geometry = ArrayGeometry(n_antennas=8)
    a = signal_model.steering_vector(geometry, math.radians(50.0))
    d = _complex(rng, 1, 6)
    s = least_norm_solve(LeastNormProblem(a[None, :], d))
    assert np.allclose(s, np.outer(a.conj(), d[0]) / 8, atol=1e-12)
    assert math.isclose(float(np.linalg.norm(s) ** 2), float(np.linalg.norm(d) ** 2) / 8, rel_tol=1e-12)


def test_least_norm_matches_pseudoinverse_oracle(rng):
    for _ in range(10):
        a = _complex(rng, 3, 7)
        d = _complex(rng, 3, 4)
        s = least_norm_solve(LeastNormProblem(a, d))
        oracle = np.linalg.pinv(a) @ d
        assert np.linalg.norm(s - oracle) <= 1e-8 * np.linalg.norm(oracle)


def test_least_norm_is_minimal_over_null_space(rng):
    a = _complex(rng, 3, 6)
    d = _complex(rng, 3, 2)
    s = least_norm_solve(LeastNormProblem(a, d))
    null = scipy.linalg.null_space(a)
    assert null.shape[1] == 3
    base = np.linalg.norm(s)
    for _ in range(20):
        other = s + null @ _complex(rng, 3, 2)
        assert np.linalg.norm(a @ other - d) < 1e-9 * np.linalg.norm(d)
        assert np.linalg.norm(other) >= base


def test_least_norm_one_dimensional_targets_become_a_column(rng):
    a = _complex(rng, 2, 5)
    problem = LeastNormProblem(a, _complex(rng, 2))
    assert problem.targets.shape == (2, 1)
    assert least_norm_solve(problem).shape == (5, 1)


def test_least_norm_duplicate_bearings_raise_with_pair():
    geometry = ArrayGeometry(n_antennas=8)
    a = signal_model.steering_matrix(geometry, [math.radians(40.0), math.radians(80.0), math.radians(40.0)])
    problem = LeastNormProblem(a, np.ones((3, 2)), ("eve0", "comm0", "eve1"))
    with pytest.raises(RankDeficiencyError) as info:
        least_norm_solve(problem)
    assert info.value.pair == ("eve0", "eve1")
    assert "eve0" in str(info.value)


def test_check_full_row_rank_rejects_tall_matrix():
    with pytest.raises(RankDeficiencyError):
        check_full_row_rank(np.ones((4, 3)))


def test_least_norm_label_count_mismatch():
    with pytest.raises(DomainError):
        LeastNormProblem(np.eye(2), np.ones((2, 1)), ("only-one",))


# --- box QP ---------------------------------------------------------------


def test_box_qp_without_boxed_block_reduces_to_least_norm(rng):
    a = _complex(rng, 3, 6)
    d = _complex(rng, 3)
    qp = BoxQp(12, 0, lift_matrix(a), lift_vector(d), 1.0)
    solution = solve_box_qp(qp)
    expected = least_norm_solve(LeastNormProblem(a, d))[:, 0]
    assert np.allclose(unlift_vector(solution.free_block), expected, atol=1e-10)
    assert solution.method == "kkt"
    assert solution.converged


def test_inactive_box_returns_kkt_point():
    qp = _grid_instance(0)
    huge = BoxQp(4, 2, qp.equality_lhs, qp.equality_rhs, 1e6)
    bigger = BoxQp(4, 2, qp.equality_lhs, qp.equality_rhs, 1e9)
    first, second = solve_box_qp(huge), solve_box_qp(bigger)
    assert first.method == "kkt"
    assert np.allclose(first.z, second.z, atol=1e-8)
    assert np.allclose(first.boxed_block, [2.5, -1.8], atol=1e-8)
    assert first.objective < 1e-12
    assert all(r < 1e-9 for r in kkt_residual(huge, first))


@pytest.mark.parametrize("seed", range(5))
def test_box_qp_matches_grid_search_oracle(seed):
    qp = _grid_instance(seed)
    solution = solve_box_qp(qp)
    grid_objective, _ = grid_search_box_qp(qp, points=41)
    assert solution.objective <= grid_objective + 1e-9
    assert grid_objective - solution.objective <= 1e-3
    assert np.max(np.abs(solution.boxed_block)) <= qp.box_bound
    assert solution.equality_residual < 1e-8


def test_box_active_solution_has_zero_box_violation_and_small_kkt_residual():
    qp = _grid_instance(1)
    solution = solve_box_qp(qp)
    stationarity, primal, box_violation = kkt_residual(qp, solution)
    assert box_violation == 0.0
    assert primal < 1e-8
    assert stationarity < 1e-6


def test_kkt_residual_detects_perturbation():
    qp = _grid_instance(2)
    solution = solve_box_qp(qp)
    # unit row of the orthonormal free block, so the primal residual is exactly the step size
    solution.free_block = solution.free_block + 1e-3 * qp.lhs_free[0]
    _, primal, _ = kkt_residual(qp, solution)
    assert primal == pytest.approx(1e-3, rel=1e-6)


def test_larger_box_never_hurts():
    qp = _grid_instance(3)
    objectives = []
    for bound in (0.25, 0.5, 1.0, 2.0):
        boxed = BoxQp(4, 2, qp.equality_lhs, qp.equality_rhs, bound)
        objectives.append(solve_box_qp(boxed).objective)
    assert all(b <= a + 1e-9 for a, b in zip(objectives, objectives[1:]))


def test_admm_path_without_polish_approaches_optimum():
    qp = _grid_instance(4)
    polished = solve_box_qp(qp)
    plain = solve_box_qp(qp, settings=QpSettings(method="admm", polish=False))
    assert plain.method == "admm"
    assert plain.equality_residual < 1e-8
    assert np.max(np.abs(plain.boxed_block)) <= qp.box_bound
    assert abs(plain.objective - polished.objective) <= 1e-4 * max(1.0, polished.objective)


def test_max_iter_exhausted_reports_not_converged():
    qp = _grid_instance(0)
    solution = solve_box_qp(qp, max_iter=1, settings=QpSettings(method="admm", polish=False))
    assert not solution.converged
    assert solution.iterations == 1
    assert solution.method == "admm"
    assert np.max(np.abs(solution.boxed_block)) <= qp.box_bound


def test_dependent_equalities_raise_infeasible():
    lhs = np.array([[1.0, 0.0, 1.0], [2.0, 0.0, 2.0]])
    with pytest.raises(InfeasibleError):
        solve_box_qp(BoxQp(2, 1, lhs, np.array([1.0, 2.0]), 1.0))


def test_box_qp_is_deterministic():
    qp = _grid_instance(5)
    first, second = solve_box_qp(qp), solve_box_qp(qp)
    assert np.array_equal(first.z, second.z)
    assert first.method == second.method


def test_box_qp_validates_shapes():
    with pytest.raises(DomainError):
        BoxQp(2, 1, np.ones((2, 4)), np.ones(2), 1.0)
    with pytest.raises(DomainError):
        BoxQp(2, 1, np.ones((2, 3)), np.ones(3), 1.0)
    with pytest.raises(DomainError):
        BoxQp(2, 1, np.ones((2, 3)), np.ones(2), 0.0)


def test_grid_search_refuses_large_boxed_block():
    with pytest.raises(DomainError):
        grid_search_box_qp(BoxQp(1, 5, np.ones((1, 6)), np.ones(1), 1.0))


def test_active_box_is_solved_by_bounded_least_squares():
    qp = _grid_instance(2)
    solution = solve_box_qp(qp)
    assert solution.method == "bvls"
    assert solution.converged
    stationarity, primal, box_violation = kkt_residual(qp, solution)
    assert box_violation == 0.0
    assert primal < 1e-10
    assert stationarity < 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_bounded_least_squares_agrees_with_admm(seed):
    qp = _grid_instance(seed)
    reduced = solve_box_qp(qp)
    admm = solve_box_qp(qp, settings=QpSettings(method="admm"))
    assert reduced.objective <= admm.objective + 1e-9 * max(1.0, admm.objective)
    assert admm.objective - reduced.objective <= 1e-6 * max(1.0, reduced.objective)


def test_reduced_solve_handles_nearly_parallel_steering_rows():
    geometry = ArrayGeometry(n_antennas=8)
    angles = np.radians([60.0, 60.5, 120.0])
    a = signal_model.steering_matrix(geometry, angles)
    n_e = 2
    # eve rows: a_i s = y_i, comm row: a s = 3 + 3j (far outside the unit box)
    boxed = np.vstack([-np.eye(n_e), np.zeros((1, n_e))])
    lhs = np.hstack([lift_matrix(a), lift_matrix(boxed)])
    rhs = lift_vector(np.array([0.0, 0.0, 3.0 + 3.0j]))
    qp = BoxQp(16, 2 * n_e, lhs, rhs, 0.5)
    solution = solve_box_qp(qp)
    assert solution.method in ("kkt", "bvls")
    assert solution.converged
    stationarity, primal, box_violation = kkt_residual(qp, solution)
    assert box_violation == 0.0
    assert primal <= 1e-9 * np.linalg.norm(rhs)
    assert stationarity <= 1e-6 * max(1.0, float(np.linalg.norm(solution.multipliers)))
    # a zero boxed block is always feasible, so it bounds the optimum
    zero_y = least_norm_solve(LeastNormProblem(a, np.array([0.0, 0.0, 3.0 + 3.0j])))
    assert solution.objective <= float(np.vdot(zero_y, zero_y).real) + 1e-9


def test_unknown_qp_method_is_rejected():
    with pytest.raises(DomainError):
        solve_box_qp(_grid_instance(0), settings=QpSettings(method="cvx"))
