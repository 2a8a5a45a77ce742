"""Shared fixtures: default numerology, small grids and scenario factories."""

from __future__ import annotations

import json

import numpy as np
import pytest

from dwbsim.beamformer import DwbProblem
from dwbsim.models import (
    ArrayGeometry,
    Bearings,
    OfdmGrid,
    QamConstellation,
    ScenarioConfig,
    SolverOptions,
    SpoofProfile,
    SweepConfig,
)


@pytest.fixture
def grid():
    return OfdmGrid()


@pytest.fixture
def small_grid():
    return OfdmGrid(n_subcarriers=16, n_symbols=8, cp_len=4)


@pytest.fixture
def geometry():
    return ArrayGeometry()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_problem():
    """Factory for DwbProblem instances with random comm symbols."""

    def _make(
        n_t=16,
        comm_deg=(80.0,),
        eve_deg=(70.0, 90.0),
        grid=None,
        order=64,
        seed=0,
        tx_snr_db=10.0,
        spoof=SpoofProfile(30.0, 500.0),
        options=None,
        symbol_index=0,
    ):
        grid = grid or OfdmGrid()
        constellation = QamConstellation(order=order)
        bearings = Bearings.from_degrees(comm_deg, eve_deg)
        comm = constellation.random_symbols(
            np.random.default_rng(seed), (bearings.n_comm, grid.n_subcarriers)
        )
        return DwbProblem(
            geometry=ArrayGeometry(n_antennas=n_t),
            bearings=bearings,
            grid=grid,
            constellation=constellation,
            spoof=spoof,
            comm_symbols=comm,
            tx_snr_db=tx_snr_db,
            symbol_index=symbol_index,
            options=options or SolverOptions(),
        )

    return _make


@pytest.fixture
def small_config():
    """Scenario small enough for end-to-end runs in a unit test."""
    return ScenarioConfig(
        array=ArrayGeometry(n_antennas=8),
        grid=OfdmGrid(n_subcarriers=16, n_symbols=4, cp_len=4),
        qam_order=16,
        spoof=SpoofProfile(30.0, 500.0),
        sweep=SweepConfig(n_t=(8,), n_c=(1,), n_e=(0, 1, 2), snr_db=(10.0,)),
        n_trials=3,
    )


@pytest.fixture
def small_config_file(tmp_path):
    """Same numerology as ``small_config`` written as a scenario JSON file."""
    data = {
        "array": {"n_antennas": 8},
        "grid": {"n_subcarriers": 16, "n_symbols": 4, "cp_len": 4},
        "constellation": {"order": 16},
        "spoof": {"fake_range_m": 30.0, "fake_doppler_hz": 500.0},
        "bearings": {"comm_deg": [80.0], "eve_deg": [60.0]},
        "sweep": {"n_t": [8], "n_c": [1], "n_e": [0, 1], "snr_db": [10.0]},
        "n_trials": 2,
        "seed": 3,
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path
