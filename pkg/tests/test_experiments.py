import csv
import json
import logging
import math
from dataclasses import replace

import numpy as np
import pytest

from dwbsim import results_io, signal_model
from dwbsim.beamformer import deceptive_box_bound, solve_dwb, solve_nulling
from dwbsim.errors import DomainError, OutputError
from dwbsim.experiments import (
    ArrayResponse,
    array_response,
    compare_array_responses,
    deception_demo,
    deception_trials,
    power_sweep,
    psl_db,
    random_topology,
    run_array_response,
    run_deception,
    run_power_sweep,
    summarize_sweep,
    sweep_problem,
    trial_rng,
)
from dwbsim.models import (
    SPEED_OF_LIGHT,
    ArrayGeometry,
    Bearings,
    OfdmGrid,
    ScenarioConfig,
    SpoofProfile,
    SweepConfig,
    TargetConfig,
)


def _fig2_config(**overrides) -> ScenarioConfig:
    return replace(
        ScenarioConfig(bearings=Bearings.from_degrees((80.0,), (70.0, 90.0)), spoof=SpoofProfile(30.0, 500.0)),
        **overrides,
    )


def _deception_config(**overrides) -> ScenarioConfig:
    return replace(
        ScenarioConfig(
            bearings=Bearings.from_degrees((80.0,), (70.0,)),
            spoof=SpoofProfile(30.0, 500.0),
            targets=TargetConfig(eve_range_m=20.0, eve_velocity_mps=10.0),
        ),
        **overrides,
    )


# --- seeding --------------------------------------------------------------


def test_trial_rng_is_reproducible_and_independent():
    assert np.array_equal(trial_rng(5, 3).standard_normal(4), trial_rng(5, 3).standard_normal(4))
    assert not np.array_equal(trial_rng(5, 3).standard_normal(4), trial_rng(5, 4).standard_normal(4))
    assert not np.array_equal(trial_rng(5, 3).standard_normal(4), trial_rng(6, 3).standard_normal(4))


# --- array response -------------------------------------------------------


def test_matched_filter_beam_peaks_at_its_bearing(geometry):
    theta = math.radians(63.0)
    s = signal_model.steering_vector(geometry, theta).conj()
    response = array_response(s, geometry)
    assert math.degrees(response.peak_angle_rad) == pytest.approx(63.0, abs=0.25)
    assert response.magnitude_db.max() == 0.0
    assert response.magnitude_db.min() >= -300.0
    assert response.angles_rad.size == 721


def test_array_response_of_zero_signal_is_rejected(geometry):
    with pytest.raises(DomainError):
        array_response(np.zeros((16, 4)), geometry)
    with pytest.raises(DomainError):
        array_response(np.ones((16, 4)), geometry, pattern="sum")


def test_broadside_uniform_array_psl(geometry):
    response = array_response(np.ones(16), geometry)
    assert math.degrees(response.peak_angle_rad) == pytest.approx(90.0)
    assert psl_db(response) == pytest.approx(13.2, abs=0.2)


def test_psl_without_sidelobes_is_infinite():
    angles = np.radians(np.linspace(0.0, 180.0, 181))
    db = -((np.degrees(angles) - 90.0) ** 2) / 100.0
    assert psl_db(ArrayResponse(angles, db)) == math.inf


def test_energy_and_first_column_patterns_agree_for_one_column(geometry, rng):
    s = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    first = array_response(s, geometry, pattern="first-column")
    energy = array_response(s, geometry, pattern="energy")
    assert np.allclose(first.magnitude_db, energy.magnitude_db, atol=1e-9)


def test_beam_shape_near_eavesdroppers():
    near = compare_array_responses(_fig2_config())[0]
    nulling, dwb = near.responses["nulling"], near.responses["dwb"]
    for angle in (70.0, 90.0):
        assert nulling.value_at(math.radians(angle)) < -60.0
        assert dwb.value_at(math.radians(angle)) > -60.0
    assert math.degrees(dwb.peak_angle_rad) == pytest.approx(80.0, abs=0.25)
    assert near.metrics["dwb"]["psl_db"] > 0.0
    # a rank-one nulling signal has the same pattern for every comm symbol
    assert near.metrics["nulling"]["psl_db"] == pytest.approx(17.7, abs=0.1)
    assert set(near.metrics["dwb"]["eve_levels_db"]) == {"70", "90"}


@pytest.mark.xfail(
    strict=True,
    reason="the deceptive lobes toward 70 and 90 deg rise above the nulling sidelobes (DESIGN.md)",
)
def test_dwb_psl_not_below_nulling_near_eavesdroppers():
    near = compare_array_responses(_fig2_config())[0]
    assert near.metrics["dwb"]["psl_db"] >= near.metrics["nulling"]["psl_db"]


def test_default_cases_cover_near_and_far(small_config):
    cases = compare_array_responses(replace(small_config, array=ArrayGeometry(n_antennas=8)))
    assert [c.name for c in cases] == ["near", "far"]
    assert cases[1].bearings.eve_angles_rad == pytest.approx((math.radians(30.0), math.radians(50.0)))


def test_run_array_response_writes_outputs(small_config, tmp_path):
    written = run_array_response(small_config, tmp_path)
    assert (tmp_path / "array_response.svg").exists()
    assert (tmp_path / "array_response_far.svg").exists()
    with open(written["csv"], newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert tuple(rows[0]) == results_io.ARRAY_RESPONSE_HEADER
    assert {r[2] for r in rows[1:]} == {"dwb", "nulling", "dwb-far", "nulling-far"}
    summary = json.loads(written["json"].read_text(encoding="utf-8"))
    assert set(summary["cases"]) == {"near", "far"}


# --- topologies -----------------------------------------------------------


def test_random_topology_is_reproducible():
    first = random_topology(np.random.default_rng(9), 2, 3)
    second = random_topology(np.random.default_rng(9), 2, 3)
    assert first == second
    assert first.bearings.n_comm == 2 and first.bearings.n_eve == 3
    angles = np.degrees(first.bearings.comm_angles_rad + first.bearings.eve_angles_rad)
    assert np.min(np.diff(np.sort(angles))) >= 2.0
    assert all(1.0 <= d <= 100.0 for d in first.comm_distances_m + first.eve_distances_m)


def test_random_topology_without_eavesdroppers():
    topology = random_topology(np.random.default_rng(0), 1, 0)
    assert topology.bearings.n_eve == 0
    assert topology.eve_distances_m == ()


def test_random_topology_bearings_are_uniform():
    rng = np.random.default_rng(11)
    draws = [math.degrees(random_topology(rng, 1, 0).bearings.comm_angles_rad[0]) for _ in range(10_000)]
    assert np.mean(draws) == pytest.approx(90.0, abs=2.0)
    assert 0.0 <= min(draws) and max(draws) <= 180.0


def test_random_topology_placement_failure():
    with pytest.raises(DomainError):
        random_topology(np.random.default_rng(0), 100, 0, max_resamples=10)
    with pytest.raises(DomainError):
        random_topology(np.random.default_rng(0), -1, 0)


# --- power sweep ----------------------------------------------------------


def test_small_sweep_pairs_and_dominance(small_config):
    records = power_sweep(small_config)
    assert len(records) == 3 * 3
    assert [r.trial_id for r in records] == sorted(r.trial_id for r in records)
    assert not any(r.errors for r in records)
    for record in records:
        assert record.dwb_relaxed_power_w <= record.nulling_power_w * (1.0 + 1e-9)
        if record.n_e == 0:
            assert record.dwb_power_w == record.nulling_power_w
    summary = summarize_sweep(records, small_config)
    assert [row["n_e"] for row in summary] == [0, 1, 2]
    assert summary[0]["saving_pct"] == 0.0
    assert all(row["n_ok"] == 3 for row in summary)


def test_sweep_points_share_topology_within_a_trial(small_config):
    records = power_sweep(replace(small_config, n_trials=1))
    nulling = [r.nulling_power_w for r in records]
    # adding an eavesdropper constraint can only raise the nulling power
    assert nulling == sorted(nulling)


def test_sweep_csv_is_reproducible_and_worker_independent(small_config, tmp_path):
    first = run_power_sweep(small_config, tmp_path / "a")["csv"].read_bytes()
    second = run_power_sweep(small_config, tmp_path / "b")["csv"].read_bytes()
    threaded = run_power_sweep(replace(small_config, workers=2), tmp_path / "c")["csv"].read_bytes()
    assert first == second == threaded
    header = first.decode("utf-8").splitlines()[0]
    assert header == ",".join(results_io.POWER_SWEEP_HEADER)
    assert (tmp_path / "a" / "power_sweep_summary.csv").exists()
    assert (tmp_path / "a" / "power_sweep.svg").exists()


def test_sweep_problem_matches_recorded_trial(small_config):
    records = power_sweep(small_config)
    record = next(r for r in records if r.trial_id == 1 and r.n_e == 2)
    problem = sweep_problem(small_config, 1, record.n_t, record.n_c, 2, record.snr_db)
    assert solve_dwb(problem).power_w == record.dwb_power_w
    assert solve_nulling(problem).power_w == record.nulling_power_w


def test_ill_conditioned_topology_relaxed_solve_converges(caplog):
    # trial 38 of the default sweep places bearings that make A A^H badly conditioned
    problem = sweep_problem(ScenarioConfig(seed=0), 38, 16, 2, 6, 10.0)
    with caplog.at_level(logging.WARNING):
        dwb = solve_dwb(problem)
    nulling = solve_nulling(problem)
    diag = dwb.solver_diag
    assert diag.converged
    assert set(diag.methods) <= {"kkt", "bvls"}
    assert not [r for r in caplog.records if "converg" in r.getMessage()]
    assert dwb.relaxed_power_w <= nulling.power_w * (1.0 + 1e-9)
    assert diag.comm_residual_rel <= 1e-8
    bound = deceptive_box_bound(problem.constellation.scaled(dwb.symbol_power_w))
    relaxed = dwb.deceptive_symbols_relaxed
    assert np.all(np.abs(relaxed.real) <= bound) and np.all(np.abs(relaxed.imag) <= bound)


def test_sweep_records_failures_and_continues(small_config):

    duplicate = Bearings.from_degrees((80.0,), (80.0, 40.0))
    config = replace(small_config, bearings=duplicate, sweep=SweepConfig(n_t=(8,), n_c=(1,), n_e=(0, 1)))
    records = power_sweep(config)
    by_ne = {r.n_e: r for r in records if r.trial_id == 0}
    assert by_ne[0].errors == 0
    assert by_ne[1].errors == 1
    assert math.isnan(by_ne[1].dwb_power_w)


# --- deception ------------------------------------------------------------


def test_noiseless_deception_on_default_grid(grid):
    report, rd_map = deception_demo(_deception_config())
    doppler = 10.0 * grid.carrier_hz / SPEED_OF_LIGHT
    assert report.fake_range_m == pytest.approx(50.0)
    assert report.fake_doppler_hz == pytest.approx(doppler + 500.0)
    assert report.range_tolerance_m == pytest.approx(SPEED_OF_LIGHT / (2 * 256 * 312.5e3))
    assert report.unambiguous
    assert report.deceived
    assert report.comm_symbol_errors == 0
    assert report.comm_symbols_total == 64 * 32
    assert report.max_comm_residual_rel < 1e-8
    assert rd_map.magnitudes.shape == (256, 128)
    assert abs(report.known.range_m - report.true_range_m) > 10.0


def test_blind_eavesdropper_finds_the_true_range_not_the_fake_one():
    report, _ = deception_demo(_deception_config())
    assert abs(report.blind.range_m - report.true_range_m) <= report.range_tolerance_m
    assert abs(report.blind.range_m - report.fake_range_m) > 10.0
    assert report.blind_symbol_error_rate > 0.5
    assert report.to_dict()["blind_range_error_m"] > 10.0


def test_zero_spoof_reports_true_target(grid):
    report, _ = deception_demo(_deception_config(spoof=SpoofProfile()))
    assert report.fake_range_m == pytest.approx(20.0)
    assert report.deceived


def test_run_deception_writes_outputs(small_config, tmp_path):
    config = replace(
        small_config,
        bearings=Bearings.from_degrees((80.0,), (60.0,)),
        targets=TargetConfig(eve_range_m=20.0, eve_velocity_mps=10.0),
    )
    written = run_deception(config, tmp_path)
    report = json.loads(written["json"].read_text(encoding="utf-8"))
    assert report["deceived"] in (True, False)
    assert "blind_range_error_m" in report
    assert 0.0 <= report["blind_symbol_error_rate"] <= 1.0
    lines = written["csv"].read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(results_io.RANGE_DOPPLER_HEADER)
    assert len(lines) == 1 + 4 * 16 * 4 * 4
    assert written["svg"].exists()


def test_batch_deception_on_small_grid(small_config):
    config = replace(small_config, grid=OfdmGrid(n_subcarriers=16, n_symbols=8, cp_len=4), n_trials=3)
    rows = deception_trials(config)
    assert [r["trial_id"] for r in rows] == [0, 1, 2]
    grid = config.grid
    range_tol = SPEED_OF_LIGHT / (2.0 * 4 * grid.n_subcarriers * grid.subcarrier_spacing_hz)
    doppler_tol = 1.0 / (2.0 * 4 * grid.n_symbols * grid.symbol_duration_s)
    for row in rows:
        assert row["deception_range_err_m"] <= range_tol
        assert row["deception_doppler_err_hz"] <= doppler_tol
    assert rows == deception_trials(replace(config, workers=2))


# --- output helpers -------------------------------------------------------


@pytest.mark.parametrize(
    "value, text",
    [(True, "1"), (np.int64(7), "7"), (0.1, "0.1"), (float("nan"), "nan"), (-math.inf, "-inf"), ("x", "x")],
)
def test_format_value(value, text):
    assert results_io.format_value(value) == text


def test_json_writer_handles_numpy_and_non_finite(tmp_path):
    path = results_io.write_json_atomic(
        tmp_path / "out.json", {"a": np.arange(3), "b": math.inf, "c": np.float64(0.5), "d": 1 + 2j}
    )
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data == {"a": [0, 1, 2], "b": "inf", "c": 0.5, "d": [1.0, 2.0]}
    assert list(tmp_path.iterdir()) == [path]


def test_csv_writer_reports_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("", encoding="utf-8")
    with pytest.raises(OutputError):
        results_io.write_csv(blocker / "sub" / "out.csv", ("a",), [{"a": 1}])


# --- acceptance-scale runs ------------------------------------------------


@pytest.mark.slow
def test_relaxed_dominance_over_random_topologies():
    config = ScenarioConfig(
        sweep=SweepConfig(n_t=(16,), n_c=(2,), n_e=(2,), snr_db=(10.0,)), n_trials=100, seed=1
    )
    for record in power_sweep(config):
        assert not record.errors
        assert record.dwb_relaxed_power_w <= record.nulling_power_w * (1.0 + 1e-9)


@pytest.fixture(scope="module")
def default_sweep_summary():
    config = ScenarioConfig(n_trials=100, seed=0, workers=4)
    return config, summarize_sweep(power_sweep(config), config)


@pytest.mark.slow
def test_dwb_uses_less_power_at_every_sweep_point(default_sweep_summary, tmp_path):
    config, summary = default_sweep_summary
    for row in summary:
        assert row["n_ok"] == 100
        assert row["dwb_mean_w"] < row["nulling_mean_w"]
    first = run_power_sweep(config, tmp_path / "a")["csv"].read_bytes()
    second = run_power_sweep(config, tmp_path / "b")["csv"].read_bytes()
    assert first == second


@pytest.mark.slow
@pytest.mark.xfail(
    strict=False,
    reason="a few ill-conditioned topologies dominate the mean saving at large N_e (DESIGN.md)",
)
def test_power_saving_grows_with_eavesdroppers(default_sweep_summary):
    _, summary = default_sweep_summary
    for n_c in (2, 4):
        savings = [row["saving_pct"] for row in summary if row["n_c"] == n_c]
        assert savings[-1] > savings[0]



@pytest.mark.slow
def test_nulling_power_falls_with_more_antennas():
    config = ScenarioConfig(
        sweep=SweepConfig(n_t=(8, 16, 32), n_c=(2,), n_e=(2,), snr_db=(10.0,)), n_trials=20
    )
    summary = summarize_sweep(power_sweep(config), config)
    means = [row["nulling_mean_w"] for row in summary]
    assert means[0] > means[1] > means[2]


@pytest.mark.slow
def test_batch_deception_on_default_grid():
    config = ScenarioConfig(n_trials=100, workers=4)
    rows = deception_trials(config)
    grid = config.grid
    for row in rows:
        assert row["deception_range_err_m"] <= SPEED_OF_LIGHT / (2.0 * 256 * grid.subcarrier_spacing_hz)
        assert row["deception_doppler_err_hz"] <= 1.0 / (2.0 * 128 * grid.symbol_duration_s)
