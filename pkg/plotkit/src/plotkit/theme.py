"""Shared figure styling: one place for rcParams and method colors."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "figure.figsize": (6.0, 3.8),
    "figure.dpi": 110,
    "savefig.dpi": 200,
    "font.size": 9,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
}

# stable colors for the headline methods; everything else cycles
METHOD_COLORS = {
    "SCR": "#d62728",
    "MCB-K2": "#1f77b4",
    "MCB-K2-PF3": "#2ca02c",
}
FALLBACK_CYCLE = ("#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                  "#bcbd22", "#17becf")

METRIC_AXIS = {
    "sr": "success rate",
    "av": "average velocity (m/s)",
    "ael": "average episode length (steps)",
    "ans": "average navigation score",
}


def color_for(label: str, index: int) -> str:
    return METHOD_COLORS.get(label,
                             FALLBACK_CYCLE[index % len(FALLBACK_CYCLE)])


def new_axes(figsize=None):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=figsize or RC["figure.figsize"])
    return fig, ax


def save_figure(fig, out_base) -> list[str]:
    """Write vector + raster variants next to each other."""
    written = []
    for ext in ("pdf", "png"):
        path = f"{out_base}.{ext}"
        fig.savefig(path, bbox_inches="tight")
        written.append(path)
    plt.close(fig)
    return written
