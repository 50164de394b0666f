"""Matplotlib defaults and figure helpers for run reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    # Keep PNG bytes independent of the matplotlib build date.
    "path.simplify": True,
}

MODE_COLORS = {"adaptive": "#c0392b", "static": "#2c3e50", "true": "#95a5a6"}


def new_figure(width: float = 4.5, height: float = 3.2, **kwargs):
    with plt.rc_context(RC):
        return plt.subplots(figsize=(width, height), **kwargs)


def save(fig, path: str | Path) -> Path:
    path = Path(path)
    with plt.rc_context(RC):
        fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path
