"""Figure rendering for benchmark output (file backend only)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def render_curves(path: str, curves, *, xlabel: str = "effective passes",
                  ylabel: str = "objective suboptimality") -> str:
    """Write a log-scale convergence plot.

    ``curves``: iterable of (label, passes, mean_log10_subopt).  NaN entries
    (gap at the measurement floor) leave gaps in the line rather than
    dragging it down.
    """
    fig, ax = plt.subplots(figsize=(7.0, 4.6))
    for label, passes, mean_log in curves:
        y = np.power(10.0, np.asarray(mean_log, dtype=float))
        ax.plot(np.asarray(passes, dtype=float), y, marker="o",
                markersize=3, linewidth=1.4, label=label)
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
