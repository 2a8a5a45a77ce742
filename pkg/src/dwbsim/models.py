"""Data models for the array, OFDM grid, constellations, channels and scenarios."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from dwbsim.errors import DomainError

SPEED_OF_LIGHT = 299_792_458.0
QAM_ORDERS = (4, 16, 64, 256)


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array: element count and spacing in wavelengths."""

    n_antennas: int = 16
    spacing_over_wavelength: float = 0.5

    def __post_init__(self) -> None:
        if int(self.n_antennas) != self.n_antennas or self.n_antennas < 1:
            raise DomainError(f"n_antennas must be a positive integer, got {self.n_antennas!r}")
        _require_finite("spacing_over_wavelength", self.spacing_over_wavelength)
        if self.spacing_over_wavelength <= 0:
            raise DomainError("spacing_over_wavelength must be positive")


@dataclass(frozen=True)
class Bearings:
    """Known bearings (radians, [0, pi]) of the comm receivers and eavesdroppers."""

    comm_angles_rad: Tuple[float, ...] = ()
    eve_angles_rad: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "comm_angles_rad", tuple(float(a) for a in self.comm_angles_rad))
        object.__setattr__(self, "eve_angles_rad", tuple(float(a) for a in self.eve_angles_rad))
        for group, angles in (("comm", self.comm_angles_rad), ("eve", self.eve_angles_rad)):
            for angle in angles:
                if not (0.0 <= angle <= math.pi):
                    raise DomainError(f"{group} bearing {angle!r} rad outside [0, pi]")
        if self.n_comm + self.n_eve < 1:
            raise DomainError("at least one bearing (comm or eve) is required")

    @classmethod
    def from_degrees(cls, comm_deg, eve_deg) -> "Bearings":
        return cls(
            tuple(math.radians(float(a)) for a in comm_deg),
            tuple(math.radians(float(a)) for a in eve_deg),
        )

    @property
    def n_comm(self) -> int:
        return len(self.comm_angles_rad)

    @property
    def n_eve(self) -> int:
        return len(self.eve_angles_rad)

    def subset(self, n_comm: int, n_eve: int) -> "Bearings":
        """Leading n_comm comm and n_eve eve bearings (paired sweeps share prefixes)."""
        if n_comm > self.n_comm or n_eve > self.n_eve:
            raise DomainError(
                f"subset ({n_comm}, {n_eve}) exceeds available ({self.n_comm}, {self.n_eve})"
            )
        return Bearings(self.comm_angles_rad[:n_comm], self.eve_angles_rad[:n_eve])


@dataclass(frozen=True)
class OfdmGrid:
    """OFDM numerology. T_L = 1/delta_f is always derived, never stored."""

    n_subcarriers: int = 64
    subcarrier_spacing_hz: float = 312.5e3
    n_symbols: int = 32
    carrier_hz: float = 5.9e9
    cp_len: int = 16

    def __post_init__(self) -> None:
        if self.n_subcarriers < 1:
            raise DomainError("n_subcarriers must be >= 1")
        if self.n_symbols < 1:
            raise DomainError("n_symbols must be >= 1")
        for name in ("subcarrier_spacing_hz", "carrier_hz"):
            value = getattr(self, name)
            _require_finite(name, value)
            if value <= 0:
                raise DomainError(f"{name} must be positive")
        if self.cp_len < 0 or self.cp_len >= self.n_subcarriers:
            raise DomainError(
                f"cp_len must satisfy 0 <= cp_len < L, got {self.cp_len} (L={self.n_subcarriers})"
            )

    @property
    def symbol_duration_s(self) -> float:
        return 1.0 / self.subcarrier_spacing_hz

    def subcarrier_freqs_hz(self) -> np.ndarray:
        return np.arange(self.n_subcarriers) * self.subcarrier_spacing_hz


@dataclass(frozen=True)
class QamConstellation:
    """Square QAM with unit mean energy, scaled by sqrt(symbol_power_w)."""

    order: int = 64
    symbol_power_w: float = 1.0

    def __post_init__(self) -> None:
        if self.order not in QAM_ORDERS:
            raise DomainError(f"QAM order must be one of {QAM_ORDERS}, got {self.order!r}")
        _require_finite("symbol_power_w", self.symbol_power_w)
        if self.symbol_power_w <= 0:
            raise DomainError("symbol_power_w must be positive")

    @property
    def unit_levels(self) -> np.ndarray:
        side = int(round(math.sqrt(self.order)))
        raw = 2.0 * np.arange(side) - (side - 1)
        return raw / math.sqrt(2.0 * (self.order - 1) / 3.0)

    @property
    def per_axis_levels(self) -> np.ndarray:
        return math.sqrt(self.symbol_power_w) * self.unit_levels

    @property
    def points(self) -> np.ndarray:
        levels = self.per_axis_levels
        return (levels[None, :] + 1j * levels[:, None]).reshape(-1)

    @property
    def max_amplitude(self) -> float:
        """Largest per-axis magnitude of any point."""
        return float(self.per_axis_levels[-1])

    def scaled(self, symbol_power_w: float) -> "QamConstellation":
        return replace(self, symbol_power_w=symbol_power_w)

    def random_symbols(self, rng: np.random.Generator, shape) -> np.ndarray:
        levels = self.per_axis_levels
        re = rng.integers(0, levels.size, size=shape)
        im = rng.integers(0, levels.size, size=shape)
        return levels[re] + 1j * levels[im]


@dataclass(frozen=True)
class SpoofProfile:
    """Fake range/Doppler embedded toward the eavesdroppers."""

    fake_range_m: float = 0.0
    fake_doppler_hz: float = 0.0

    def __post_init__(self) -> None:
        _require_finite("fake_range_m", self.fake_range_m)
        _require_finite("fake_doppler_hz", self.fake_doppler_hz)


@dataclass(frozen=True)
class ChannelRealization:
    """Line-of-sight channel toward one receiver.

    With ``taps`` unset the channel is the idealized flat-per-subcarrier
    diagonal (path gain, delay ramp, Doppler step); with ``taps`` set it is
    the circulant multipath channel those taps define.
    """

    path_gain: float = 1.0
    range_m: float = 0.0
    velocity_mps: float = 0.0
    carrier_hz: float = 5.9e9
    noise_var: float = 1.0
    taps: Optional[Tuple[complex, ...]] = None

    def __post_init__(self) -> None:
        for name in ("path_gain", "range_m", "velocity_mps", "carrier_hz", "noise_var"):
            _require_finite(name, getattr(self, name))
        if self.path_gain <= 0:
            raise DomainError("path_gain must be positive")
        if self.range_m < 0:
            raise DomainError("range_m must be nonnegative")
        if self.noise_var < 0:
            raise DomainError("noise_var must be nonnegative")
        if self.taps is not None:
            taps = tuple(complex(t) for t in self.taps)
            if not taps:
                raise DomainError("taps must contain at least one coefficient")
            object.__setattr__(self, "taps", taps)

    @classmethod
    def for_target(
        cls,
        grid: OfdmGrid,
        range_m: float,
        velocity_mps: float,
        path_gain: float = 1.0,
        noise_var: float = 1.0,
    ) -> "ChannelRealization":
        return cls(
            path_gain=path_gain,
            range_m=range_m,
            velocity_mps=velocity_mps,
            carrier_hz=grid.carrier_hz,
            noise_var=noise_var,
        )

    @property
    def doppler_hz(self) -> float:
        return self.velocity_mps * self.carrier_hz / SPEED_OF_LIGHT


@dataclass
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 5000
    rho: float = 1.0
    polish: bool = True
    resolve_after_rounding: bool = True
    decompose: bool = True
    qp_method: str = "auto"


@dataclass
class RadarOptions:
    pad_range: int = 4
    pad_doppler: int = 4
    interpolate: bool = True
    blind_equalization: str = "phase-only"


@dataclass
class TargetConfig:
    """True kinematics used by the deception demo (the optimizer never sees them)."""

    eve_range_m: float = 20.0
    eve_velocity_mps: float = 10.0
    comm_range_m: float = 50.0
    comm_velocity_mps: float = 0.0
    path_gain: float = 1.0
    rx_noise_var: float = 0.0


@dataclass
class SweepConfig:
    n_t: Tuple[int, ...] = (16,)
    n_c: Tuple[int, ...] = (2, 4)
    n_e: Tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    snr_db: Tuple[float, ...] = (10.0,)

    def points(self):
        """Sweep points in a fixed order: n_t, n_c, n_e, snr_db (outer to inner)."""
        for n_t in self.n_t:
            for n_c in self.n_c:
                for n_e in self.n_e:
                    for snr in self.snr_db:
                        yield int(n_t), int(n_c), int(n_e), float(snr)


@dataclass
class ScenarioConfig:
    array: ArrayGeometry = field(default_factory=ArrayGeometry)
    grid: OfdmGrid = field(default_factory=OfdmGrid)
    qam_order: int = 64
    spoof: SpoofProfile = field(default_factory=SpoofProfile)
    bearings: Optional[Bearings] = None
    targets: TargetConfig = field(default_factory=TargetConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)
    radar: RadarOptions = field(default_factory=RadarOptions)
    tx_snr_db: float = 10.0
    noise_var: float = 1.0
    n_trials: int = 100
    seed: int = 0
    output_dir: Optional[str] = None
    workers: int = 1
    array_pattern: str = "first-column"

    @property
    def constellation(self) -> QamConstellation:
        return QamConstellation(order=self.qam_order)


@dataclass
class TrialRecord:
    trial_id: int
    n_t: int
    n_c: int
    n_e: int
    snr_db: float
    dwb_power_w: float = float("nan")
    nulling_power_w: float = float("nan")
    dwb_relaxed_power_w: float = float("nan")
    psl_db_dwb: float = float("nan")
    psl_db_nulling: float = float("nan")
    deception_range_err_m: float = float("nan")
    deception_doppler_err_hz: float = float("nan")
    seed: int = 0
    errors: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
