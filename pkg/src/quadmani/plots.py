"""Figure rendering for report tables; every function writes one PNG."""

from __future__ import annotations

import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "savefig.dpi": 150,
    "figure.figsize": (5.0, 5.0 * (math.sqrt(5) - 1) / 2),
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def singular_values(rows, path) -> None:
    idx = [r[0] for r in rows]
    sig = np.array([r[1] for r in rows])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.semilogy(idx, np.where(sig > 0, sig / sig[0], np.nan), lw=1.2)
        ax.set_xlabel("index")
        ax.set_ylabel("normalized singular value")
        ax.grid(True, which="both", alpha=0.3)
        _save(fig, path)


def correlations(report, path, title: str = "") -> None:
    C = np.abs(report.Ctilde)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 4.0))
        im = ax.imshow(C, aspect="auto", vmin=0.0, vmax=1.0, cmap="viridis", interpolation="nearest")
        ax.set_xlabel("feature (column of lifted states)")
        ax.set_ylabel("row (unselected singular vector)")
        if title:
            ax.set_title(title)
        fig.colorbar(im, ax=ax, label="|correlation|")
        _save(fig, path)


def error_sweep(reports, path) -> None:
    """Relative error against r, one line per (method, encoder)."""
    series = defaultdict(list)
    for rep in reports:
        series[(rep.method, rep.encoder)].append((rep.r, rep.E_rel))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for (method, encoder), pts in sorted(series.items()):
            pts.sort()
            ax.semilogy([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3,
                        label=f"{method} ({encoder})")
        ax.set_xlabel("reduced dimension r")
        ax.set_ylabel("relative test error")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        _save(fig, path)


def am_convergence(history, path) -> None:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.semilogy(np.arange(len(history)), history, lw=1.2)
        ax.set_xlabel("outer iteration")
        ax.set_ylabel("objective")
        ax.grid(True, which="both", alpha=0.3)
        _save(fig, path)
