"""Grayscale report figures written with the Agg backend."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def category_grid(levels: np.ndarray, window, legend: dict, path) -> None:
    """Gray-level category image; ``legend`` maps category names to levels."""
    x0, x1, y0, y1 = window
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(levels, cmap="gray", vmin=0, vmax=255, extent=(x0, x1, y0, y1), interpolation="nearest")
    ax.set_xlabel("Re z")
    ax.set_ylabel("Im z")
    text = ", ".join(f"{k}={v}" for k, v in legend.items())
    ax.set_title(text, fontsize=6)
    _save(fig, path)


def density_sweep(exact, bound, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(bound, exact, "k.", markersize=3)
    lim = [min(min(bound), min(exact)), max(max(bound), max(exact))]
    ax.loglog(lim, lim, color="0.5", linewidth=1)
    ax.set_xlabel("lower bound")
    ax.set_ylabel("exact density")
    _save(fig, path)


def running_bound(values, path, target: float = 1.0) -> None:
    n = np.arange(len(values))
    keep = ~np.isnan(values)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.semilogx(n[keep], values[keep], color="black", linewidth=1)
    ax.axhline(target, color="0.5", linestyle="--", linewidth=1)
    ax.set_xlabel("depth n")
    ax.set_ylabel("finite-depth bound")
    _save(fig, path)


def upper_audit(ns, log_q, ratio, path) -> None:
    fig, (a, b) = plt.subplots(2, 1, figsize=(5, 6), sharex=True)
    a.plot(ns, log_q, color="black", linewidth=1)
    a.set_ylabel("log q_n")
    b.plot(ns, ratio, color="0.3", linewidth=1)
    b.set_ylabel("growth ratio")
    b.set_xlabel("n")
    _save(fig, path)
