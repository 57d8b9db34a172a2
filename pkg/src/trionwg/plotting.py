"""Figure rendering for the CLI report path.

Every writer takes a finished artifact and a target path, renders with the
Agg backend and closes the figure, so imports stay safe on headless hosts.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .estimate import Dataset
from .qdcore import Map2D
from .spectro import CycleResult, TransmissionSpectrum

__all__ = [
    "save_map_png",
    "save_spectrum_png",
    "save_trajectory_png",
    "save_dataset_png",
]

_AXIS_LABELS = {
    "rf_plateau_map": ("laser energy (eV)", "gate voltage (V)"),
    "rf_two_color_map": ("scanned laser energy (eV)", "gate voltage (V)"),
    "transmission_plateau_map": ("probe energy (eV)", "gate voltage (V)"),
}


def save_map_png(map2d: Map2D, path) -> None:
    xlab, ylab = _AXIS_LABELS.get(map2d.metadata.get("kind", ""),
                                  ("x", "y"))
    fig, ax = plt.subplots(figsize=(6.0, 4.2), constrained_layout=True)
    extent = (map2d.x_axis[0], map2d.x_axis[-1],
              map2d.y_axis[0], map2d.y_axis[-1])
    im = ax.imshow(map2d.values, origin="lower", aspect="auto",
                   extent=extent, cmap="inferno", interpolation="nearest")
    fig.colorbar(im, ax=ax, label=map2d.label)
    ax.set_xlabel(xlab)
    ax.set_ylabel(ylab)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_spectrum_png(spectrum: TransmissionSpectrum, path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0), constrained_layout=True)
    ax.plot(spectrum.detuning * 1e6, spectrum.transmission, lw=1.5)
    ax.axhline(spectrum.t0_background, color="0.6", lw=0.8, ls="--")
    ax.set_xlabel("probe detuning (ueV)")
    ax.set_ylabel("transmission")
    width = "n/a" if not np.isfinite(spectrum.fwhm) else f"{spectrum.fwhm * 1e6:.2f} ueV"
    ax.set_title(f"contrast {spectrum.contrast:.3f}, width {width}")
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_trajectory_png(result: CycleResult, path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0), constrained_layout=True)
    labels = ("ground up", "ground down", "trion up", "trion down")
    for k, lab in enumerate(labels):
        ax.plot(result.times * 1e6, result.populations[:, k], label=lab, lw=1.2)
    ax.set_xlabel("time in cycle (us)")
    ax.set_ylabel("population")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="center right", fontsize=8)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_dataset_png(dataset: Dataset, path, model_curve=None) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0), constrained_layout=True)
    if dataset.y_err is not None:
        ax.errorbar(dataset.x, dataset.y, yerr=dataset.y_err, fmt="o", ms=3.5,
                    lw=0.8, label="data")
    else:
        ax.plot(dataset.x, dataset.y, "o", ms=3.5, label="data")
    if model_curve is not None:
        xs, ys = model_curve
        ax.plot(xs, ys, "-", lw=1.5, label="fit")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(fontsize=8)
    fig.savefig(path, dpi=150)
    plt.close(fig)
