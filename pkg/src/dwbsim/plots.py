"""Static SVG figures for run outputs (Agg backend, reproducible metadata)."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from dwbsim.errors import OutputError  # noqa: E402

_SVG_RC = {"svg.hashsalt": "dwbsim", "svg.fonttype": "none"}


def _save(fig, path: Path) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with matplotlib.rc_context(_SVG_RC):
            fig.savefig(target, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OutputError(f"cannot write {target}: {exc}") from exc
    finally:
        plt.close(fig)
    return target


def plot_array_responses(
    curves: Mapping[str, tuple], markers_deg: Sequence[float], path: Path, title: str = ""
) -> Path:
    """curves maps a scheme label to (angles_deg, magnitude_db)."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for label, (angles_deg, mag_db) in curves.items():
        ax.plot(angles_deg, mag_db, label=label, linewidth=1.2)
    for angle in markers_deg:
        ax.axvline(angle, color="grey", linestyle=":", linewidth=0.8)
    ax.set_xlim(0.0, 180.0)
    ax.set_ylim(-80.0, 3.0)
    ax.set_xlabel("angle (deg)")
    ax.set_ylabel("|B(theta)| (dB, peak-normalized)")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    return _save(fig, path)


def plot_power_sweep(summary_rows: Sequence[Dict[str, float]], path: Path) -> Path:
    """Mean emitted power vs N_e, one DWB/nulling curve pair per (N_T, N_c, SNR)."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    groups: Dict[tuple, list] = {}
    for row in summary_rows:
        groups.setdefault((row["n_t"], row["n_c"], row["snr_db"]), []).append(row)
    for (n_t, n_c, snr), rows in sorted(groups.items()):
        rows = sorted(rows, key=lambda r: r["n_e"])
        n_e = [r["n_e"] for r in rows]
        tag = f"N_T={n_t} N_c={n_c} {snr:g} dB"
        ax.errorbar(
            n_e,
            [r["dwb_mean_w"] for r in rows],
            yerr=[r["dwb_ci95_w"] for r in rows],
            marker="o",
            capsize=3,
            label=f"DWB {tag}",
        )
        ax.errorbar(
            n_e,
            [r["nulling_mean_w"] for r in rows],
            yerr=[r["nulling_ci95_w"] for r in rows],
            marker="s",
            linestyle="--",
            capsize=3,
            label=f"nulling {tag}",
        )
    ax.set_xlabel("number of eavesdroppers N_e")
    ax.set_ylabel("transmit power per OFDM symbol (W)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_range_doppler(
    magnitude_db: np.ndarray,
    range_axis_m: np.ndarray,
    doppler_axis_hz: np.ndarray,
    path: Path,
    marker=None,
) -> Path:
    fig, ax = plt.subplots(figsize=(7, 5))
    extent = [doppler_axis_hz[0], doppler_axis_hz[-1], range_axis_m[-1], range_axis_m[0]]
    image = ax.imshow(
        np.maximum(magnitude_db, -60.0), aspect="auto", extent=extent, cmap="viridis"
    )
    if marker is not None:
        ax.plot(marker[1], marker[0], "r+", markersize=12)
    ax.set_xlabel("Doppler (Hz)")
    ax.set_ylabel("range (m)")
    fig.colorbar(image, ax=ax, label="dB")
    fig.tight_layout()
    return _save(fig, path)
