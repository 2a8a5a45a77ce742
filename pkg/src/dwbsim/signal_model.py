"""Physical-layer model: ULA steering, OFDM transforms, QAM decisions, channels.

Conventions used throughout the package:

- ``F`` is the unitary L-point DFT and ``F^H`` its inverse; ``F^H`` is what
  :func:`idft_matrix` returns and what :func:`ofdm_modulate` applies.
- Multi-receiver signals are row-major: row ``i`` of ``D`` (N x L) is the
  time-domain OFDM symbol seen at bearing ``i``, so ``A @ S = D``.
- Delay enters a subcarrier as ``exp(-j 2 pi l df R / c)`` and Doppler as
  ``exp(+j 2 pi f m T_L)``, with ``T_L = 1/df`` excluding the cyclic prefix.
"""

from __future__ import annotations

import logging
import math
from typing import Optional, Sequence

import numpy as np
import scipy.fft
import scipy.linalg

from dwbsim.errors import DomainError
from dwbsim.models import (
    SPEED_OF_LIGHT,
    ArrayGeometry,
    ChannelRealization,
    OfdmGrid,
    QamConstellation,
    SpoofProfile,
)

# relative tolerance for declaring a per-axis tie in qam_nearest
_TIE_RTOL = 1e-9


def _check_angle(angle_rad: float) -> float:
    angle = float(angle_rad)
    if not (0.0 <= angle <= math.pi):
        raise DomainError(f"angle {angle!r} rad outside [0, pi]")
    return angle


def steering_vector(geometry: ArrayGeometry, angle_rad: float) -> np.ndarray:
    """a(theta)[k] = exp(j 2 pi (d/lambda) k cos(theta)); element 0 is exactly 1."""
    angle = _check_angle(angle_rad)
    k = np.arange(geometry.n_antennas)
    return np.exp(1j * 2.0 * np.pi * geometry.spacing_over_wavelength * k * math.cos(angle))


def steering_matrix(geometry: ArrayGeometry, angles: Sequence[float]) -> np.ndarray:
    """Stack steering vectors as rows (N x N_T); an empty list gives 0 x N_T."""
    angles = [_check_angle(a) for a in np.atleast_1d(np.asarray(angles, dtype=float))]
    if not angles:
        return np.zeros((0, geometry.n_antennas), dtype=complex)
    k = np.arange(geometry.n_antennas)
    cosines = np.cos(np.asarray(angles))
    return np.exp(1j * 2.0 * np.pi * geometry.spacing_over_wavelength * np.outer(cosines, k))


def idft_matrix(n: int) -> np.ndarray:
    """Unitary IDFT matrix F^H with entries exp(j 2 pi n l / L) / sqrt(L)."""
    if n < 1:
        raise DomainError("IDFT size must be >= 1")
    idx = np.arange(n)
    # reduce the exponent modulo L first to keep the phase argument small
    phase = np.outer(idx, idx) % n
    return np.exp(2j * np.pi * phase / n) / math.sqrt(n)


def dft_matrix(n: int) -> np.ndarray:
    return idft_matrix(n).conj()


def ofdm_modulate(symbols: np.ndarray) -> np.ndarray:
    """F^H applied along the last axis (rows of an N x L block)."""
    return scipy.fft.ifft(np.asarray(symbols, dtype=complex), axis=-1, norm="ortho")


def ofdm_demod(y: np.ndarray) -> np.ndarray:
    """F applied along the last axis."""
    return scipy.fft.fft(np.asarray(y, dtype=complex), axis=-1, norm="ortho")


def _nearest_levels(values: np.ndarray, levels: np.ndarray) -> np.ndarray:
    dist = np.abs(values[..., None] - levels)
    best = dist.min(axis=-1, keepdims=True)
    spacing = float(levels[1] - levels[0]) if levels.size > 1 else 1.0
    candidates = dist <= best + _TIE_RTOL * spacing
    # preference among tied levels: smaller magnitude first, then the negative one
    order = np.lexsort((levels, np.abs(levels)))
    rank = np.empty(levels.size, dtype=int)
    rank[order] = np.arange(levels.size)
    masked = np.where(candidates, rank, levels.size)
    return levels[np.argmin(masked, axis=-1)]


def qam_nearest(value, constellation: QamConstellation):
    """Nearest constellation point, decided independently per real/imag axis.

    Accepts a scalar or an array; ties go to the smaller-magnitude level.
    """
    arr = np.asarray(value, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise DomainError("qam_nearest requires finite input")
    levels = constellation.per_axis_levels
    out = _nearest_levels(arr.real, levels) + 1j * _nearest_levels(arr.imag, levels)
    if arr.ndim == 0:
        return complex(out)
    return out


def _check_symbol_index(grid: OfdmGrid, m: int) -> None:
    if not (0 <= m < grid.n_symbols):
        raise DomainError(f"symbol index {m} outside [0, {grid.n_symbols})")


def _delay_doppler_diag(grid: OfdmGrid, range_m: float, doppler_hz: float, m: int) -> np.ndarray:
    freqs = grid.subcarrier_freqs_hz()
    delay = np.exp(-2j * np.pi * freqs * range_m / SPEED_OF_LIGHT)
    doppler = np.exp(2j * np.pi * doppler_hz * m * grid.symbol_duration_s)
    return delay * doppler


def spoof_matrix_diag(grid: OfdmGrid, profile: SpoofProfile, m: int) -> np.ndarray:
    """Diagonal of the deceiving channel matrix for OFDM symbol ``m``."""
    _check_symbol_index(grid, m)
    return _delay_doppler_diag(grid, profile.fake_range_m, profile.fake_doppler_hz, m)


def deceptive_time_signal(
    grid: OfdmGrid, profile: SpoofProfile, x_e: np.ndarray, m: int
) -> np.ndarray:
    """Rows (F^H diag(h_sp) x_e,i)^T: the spoofed OFDM symbols aimed at each eavesdropper."""
    x_e = np.atleast_2d(np.asarray(x_e, dtype=complex))
    if x_e.shape[-1] != grid.n_subcarriers:
        raise DomainError(
            f"deceptive symbols have {x_e.shape[-1]} columns, expected L={grid.n_subcarriers}"
        )
    return ofdm_modulate(x_e * spoof_matrix_diag(grid, profile, m)[None, :])


def circulant_channel(taps: Sequence[complex], n: int, cp_len: Optional[int] = None) -> np.ndarray:
    """Circulant L x L channel whose first column is the zero-padded taps."""
    taps = np.asarray(taps, dtype=complex).reshape(-1)
    if taps.size < 1:
        raise DomainError("channel needs at least one tap")
    if taps.size > n:
        raise DomainError(f"{taps.size} taps exceed L={n}: cyclic-prefix assumption violated")
    if cp_len is not None and taps.size > cp_len + 1:
        raise DomainError(f"{taps.size} taps exceed cp_len+1={cp_len + 1}")
    column = np.zeros(n, dtype=complex)
    column[: taps.size] = taps
    return scipy.linalg.circulant(column)


def freq_channel_diag(channel: ChannelRealization, grid: OfdmGrid, m: int) -> np.ndarray:
    """Frequency-domain channel diagonal for symbol ``m``.

    Idealized mode evaluates path gain x delay ramp x Doppler step; tap mode
    returns diag(F H_circ F^H), i.e. the unnormalized DFT of the taps.
    """
    _check_symbol_index(grid, m)
    if channel.taps is None:
        return channel.path_gain * _delay_doppler_diag(
            grid, channel.range_m, channel.doppler_hz, m
        )
    column = np.zeros(grid.n_subcarriers, dtype=complex)
    taps = np.asarray(channel.taps, dtype=complex)
    if taps.size > grid.n_subcarriers:
        raise DomainError(f"{taps.size} taps exceed L={grid.n_subcarriers}")
    column[: taps.size] = taps
    return scipy.fft.fft(column)


def channel_matrix(channel: ChannelRealization, grid: OfdmGrid, m: int) -> np.ndarray:
    """Time-domain circulant channel for symbol ``m`` (idealized taps synthesized by IDFT)."""
    if channel.taps is not None:
        if len(channel.taps) > grid.cp_len + 1:
            logging.debug(
                "channel has %d taps, longer than cp_len+1=%d", len(channel.taps), grid.cp_len + 1
            )
        return circulant_channel(channel.taps, grid.n_subcarriers)
    taps = scipy.fft.ifft(freq_channel_diag(channel, grid, m))
    return circulant_channel(taps, grid.n_subcarriers)


def simulate_rx(
    tx_signal: np.ndarray,
    steer: np.ndarray,
    channel: ChannelRealization,
    grid: OfdmGrid,
    m: int,
    rng_seed=None,
) -> np.ndarray:
    """Received baseband samples H_circ (S^T a) + n at a single-antenna receiver."""
    tx_signal = np.asarray(tx_signal, dtype=complex)
    steer = np.asarray(steer, dtype=complex).reshape(-1)
    if tx_signal.shape != (steer.size, grid.n_subcarriers):
        raise DomainError(
            f"S has shape {tx_signal.shape}, expected ({steer.size}, {grid.n_subcarriers})"
        )
    y = channel_matrix(channel, grid, m) @ (tx_signal.T @ steer)
    if channel.noise_var > 0:
        rng = np.random.default_rng(rng_seed)
        scale = math.sqrt(channel.noise_var / 2.0)
        y = y + scale * (rng.standard_normal(y.size) + 1j * rng.standard_normal(y.size))
    return y
