"""Passive OFDM radar run by an eavesdropper: symbol removal and range-Doppler peak search."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.fft

from dwbsim import signal_model
from dwbsim.errors import DomainError
from dwbsim.models import SPEED_OF_LIGHT, OfdmGrid, QamConstellation, RadarOptions

SYMBOL_MODES = ("known", "blind")
EQUALIZATIONS = ("none", "phase-only")


@dataclass(frozen=True)
class RxFrame:
    """Demodulated samples, one column per OFDM symbol (L x M)."""

    grid: OfdmGrid
    fd_samples: np.ndarray

    def __post_init__(self) -> None:
        y = np.asarray(self.fd_samples, dtype=complex)
        expected = (self.grid.n_subcarriers, self.grid.n_symbols)
        if y.shape != expected:
            raise DomainError(f"frame has shape {y.shape}, expected {expected}")
        object.__setattr__(self, "fd_samples", y)


@dataclass(frozen=True)
class SymbolKnowledge:
    mode: str = "known"
    symbols: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.mode not in SYMBOL_MODES:
            raise DomainError(f"symbol knowledge mode must be one of {SYMBOL_MODES}")
        if self.mode == "known" and self.symbols is None:
            raise DomainError("known mode needs the transmitted symbols")


@dataclass(frozen=True)
class RangeDopplerMap:
    magnitudes: np.ndarray
    range_axis_m: np.ndarray
    doppler_axis_hz: np.ndarray

    @property
    def range_bin_m(self) -> float:
        return float(self.range_axis_m[1] - self.range_axis_m[0]) if self.range_axis_m.size > 1 else 0.0

    @property
    def doppler_bin_hz(self) -> float:
        if self.doppler_axis_hz.size < 2:
            return 0.0
        return float(self.doppler_axis_hz[1] - self.doppler_axis_hz[0])

    def magnitude_db(self, floor_db: float = -300.0) -> np.ndarray:
        peak = float(np.max(self.magnitudes))
        if peak <= 0.0:
            return np.full(self.magnitudes.shape, floor_db)
        with np.errstate(divide="ignore"):
            db = 20.0 * np.log10(self.magnitudes / peak)
        return np.maximum(db, floor_db)


@dataclass(frozen=True)
class PeakEstimate:
    range_m: float
    doppler_hz: float
    peak_to_floor_db: float
    range_bin: int = 0
    doppler_bin: int = 0


def range_resolution_m(grid: OfdmGrid) -> float:
    return SPEED_OF_LIGHT / (grid.n_subcarriers * grid.subcarrier_spacing_hz)


def doppler_resolution_hz(grid: OfdmGrid) -> float:
    return 1.0 / (grid.n_symbols * grid.symbol_duration_s)


def max_unambiguous_range_m(grid: OfdmGrid) -> float:
    return SPEED_OF_LIGHT / grid.subcarrier_spacing_hz


def is_unambiguous(grid: OfdmGrid, range_m: float, doppler_hz: float) -> bool:
    """True when (range, Doppler) falls inside the map without aliasing."""
    half_doppler = 0.5 / grid.symbol_duration_s
    return bool(
        0.0 <= range_m < max_unambiguous_range_m(grid) and -half_doppler <= doppler_hz < half_doppler
    )


def channel_response_grid(
    grid: OfdmGrid, range_m: float, doppler_hz: float, path_gain: float = 1.0
) -> np.ndarray:
    """L x M delay/Doppler phase grid a point target at (range, Doppler) produces."""
    freqs = grid.subcarrier_freqs_hz()
    m = np.arange(grid.n_symbols)
    delay = np.exp(-2j * np.pi * freqs * range_m / SPEED_OF_LIGHT)
    doppler = np.exp(2j * np.pi * doppler_hz * m * grid.symbol_duration_s)
    return path_gain * np.outer(delay, doppler)


def collect_frame(received: Sequence[np.ndarray], grid: OfdmGrid) -> RxFrame:
    """Demodulate M time-domain symbols and stack them as columns in symbol order."""
    if len(received) != grid.n_symbols:
        raise DomainError(f"got {len(received)} symbols, grid expects {grid.n_symbols}")
    columns = []
    for m, y in enumerate(received):
        y = np.asarray(y, dtype=complex).reshape(-1)
        if y.size != grid.n_subcarriers:
            raise DomainError(f"symbol {m} has {y.size} samples, expected {grid.n_subcarriers}")
        columns.append(signal_model.ofdm_demod(y))
    return RxFrame(grid=grid, fd_samples=np.column_stack(columns))


def _common_phase(samples: np.ndarray) -> np.ndarray:
    """Per-subcarrier carrier phase from the fourth-power statistic, unwrapped across subcarriers."""
    quartic = np.sum(samples**4, axis=1)
    # square QAM has a negative real fourth moment
    phase = np.angle(-quartic) / 4.0
    return np.unwrap(phase, period=np.pi / 2.0)


def blind_demod(
    frame: RxFrame, constellation: QamConstellation, equalization: str = "none"
) -> np.ndarray:
    """Nearest-point decisions on the frame, optionally after common-phase removal."""
    if equalization not in EQUALIZATIONS:
        raise DomainError(f"equalization must be one of {EQUALIZATIONS}")
    y = frame.fd_samples
    if equalization == "phase-only":
        y = y * np.exp(-1j * _common_phase(y))[:, None]
    return signal_model.qam_nearest(y, constellation)


def remove_symbols(
    frame: RxFrame,
    knowledge: SymbolKnowledge,
    constellation: Optional[QamConstellation] = None,
    equalization: str = "none",
) -> np.ndarray:
    """Elementwise division of the frame by known or decided symbols."""
    if knowledge.mode == "known":
        symbols = np.asarray(knowledge.symbols, dtype=complex)
        if symbols.shape != frame.fd_samples.shape:
            raise DomainError(
                f"known symbols have shape {symbols.shape}, frame is {frame.fd_samples.shape}"
            )
    else:
        if constellation is None:
            raise DomainError("blind symbol removal needs a constellation")
        symbols = blind_demod(frame, constellation, equalization)
    if np.any(symbols == 0):
        raise DomainError("zero symbol in divisor")
    return frame.fd_samples / symbols


def range_doppler_map(
    z: np.ndarray, grid: OfdmGrid, pad_range: int = 4, pad_doppler: int = 4
) -> RangeDopplerMap:
    """2D transform: inverse DFT across subcarriers (delay), DFT across symbols (Doppler)."""
    if pad_range < 1 or pad_doppler < 1:
        raise DomainError("pad factors must be >= 1")
    z = np.asarray(z, dtype=complex)
    if z.shape != (grid.n_subcarriers, grid.n_symbols):
        raise DomainError(f"Z has shape {z.shape}, expected ({grid.n_subcarriers}, {grid.n_symbols})")
    p = pad_range * grid.n_subcarriers
    q = pad_doppler * grid.n_symbols
    delay_profile = scipy.fft.ifft(z, n=p, axis=0)
    rd = scipy.fft.fftshift(scipy.fft.fft(delay_profile, n=q, axis=1), axes=1)
    range_axis = np.arange(p) * SPEED_OF_LIGHT / (p * grid.subcarrier_spacing_hz)
    doppler_axis = scipy.fft.fftshift(scipy.fft.fftfreq(q, d=grid.symbol_duration_s))
    return RangeDopplerMap(
        magnitudes=np.abs(rd), range_axis_m=range_axis, doppler_axis_hz=doppler_axis
    )


def _parabolic_offset(left: float, center: float, right: float) -> float:
    denom = left - 2.0 * center + right
    if denom >= 0.0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / denom, -0.5, 0.5))


def find_peak(rd_map: RangeDopplerMap, interpolate: bool = True) -> PeakEstimate:
    """Global maximum (first in row-major order on ties) with optional parabolic refinement."""
    mag = rd_map.magnitudes
    if mag.size == 0:
        raise DomainError("empty range-Doppler map")
    p_idx, q_idx = np.unravel_index(int(np.argmax(mag)), mag.shape)
    peak = float(mag[p_idx, q_idx])
    d_range = d_doppler = 0.0
    if interpolate:
        n_p, n_q = mag.shape
        if n_p >= 3:
            d_range = _parabolic_offset(
                mag[(p_idx - 1) % n_p, q_idx], peak, mag[(p_idx + 1) % n_p, q_idx]
            )
        if n_q >= 3:
            d_doppler = _parabolic_offset(
                mag[p_idx, (q_idx - 1) % n_q], peak, mag[p_idx, (q_idx + 1) % n_q]
            )
    floor = float(np.median(mag))
    ratio_db = 20.0 * math.log10(peak / floor) if floor > 0 else math.inf
    return PeakEstimate(
        range_m=float(rd_map.range_axis_m[p_idx]) + d_range * rd_map.range_bin_m,
        doppler_hz=float(rd_map.doppler_axis_hz[q_idx]) + d_doppler * rd_map.doppler_bin_hz,
        peak_to_floor_db=ratio_db,
        range_bin=int(p_idx),
        doppler_bin=int(q_idx),
    )


def estimate_range_doppler(
    frame: RxFrame,
    knowledge: SymbolKnowledge,
    options: Optional[RadarOptions] = None,
    constellation: Optional[QamConstellation] = None,
) -> Tuple[PeakEstimate, RangeDopplerMap]:
    """Full eavesdropper chain: symbol removal, 2D transform, peak search."""
    options = options or RadarOptions()
    z = remove_symbols(frame, knowledge, constellation, options.blind_equalization)
    rd_map = range_doppler_map(z, frame.grid, options.pad_range, options.pad_doppler)
    return find_peak(rd_map, options.interpolate), rd_map
