"""Figure builders over a loaded bundle.

Each builder returns (figure, plotted) where `plotted` echoes the exact
numbers drawn, so tests can hold the rendering to the bundle contents.
"""
from __future__ import annotations

import numpy as np

from .bundle import Bundle, BundleError, METRICS
from .theme import METRIC_AXIS, color_for, new_axes


def plot_curves(bundle: Bundle, metric: str = "sr", labels=None):
    """Mean line with a +/- std band per method label."""
    if metric not in METRICS:
        raise BundleError(f"unknown metric {metric!r}")
    labels = labels or bundle.labels
    fig, ax = new_axes()
    plotted = {}
    for i, label in enumerate(labels):
        steps, mean, std = bundle.summary_series(label, metric)
        if not steps:
            continue
        steps = np.asarray(steps, dtype=float)
        mean = np.asarray(mean)
        std = np.asarray(std)
        color = color_for(label, i)
        ax.plot(steps, mean, label=label, color=color, linewidth=1.6)
        ax.fill_between(steps, mean - std, mean + std, color=color,
                        alpha=0.18, linewidth=0)
        plotted[label] = {"steps": steps, "mean": mean, "std": std}
    ax.set_xlabel("training step")
    ax.set_ylabel(METRIC_AXIS[metric])
    if metric == "sr":
        ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="best")
    fig.tight_layout()
    return fig, plotted


def plot_thresholds(bundle: Bundle, labels=None):
    """Grouped bars: mean steps to first reach each SR threshold, with
    std error bars; methods that never reached a threshold get an
    annotation instead of a bar."""
    levels = bundle.manifest.get("thresholds_pct", [50, 70, 80])
    labels = labels or bundle.labels
    rows = {(r["label"], r["threshold_pct"]): r
            for r in bundle.threshold_summaries}
    fig, ax = new_axes()
    width = 0.8 / max(1, len(labels))
    plotted = {}
    never = []
    for i, label in enumerate(labels):
        xs, heights, errs = [], [], []
        for j, pct in enumerate(levels):
            row = rows.get((label, pct))
            x = j + (i - (len(labels) - 1) / 2) * width
            if row is None or row["n_reached"] in (0, None) \
                    or row["mean_steps"] is None:
                never.append((x, label, pct))
                continue
            xs.append(x)
            heights.append(row["mean_steps"])
            errs.append(row["std_steps"] or 0.0)
        color = color_for(label, i)
        if xs:
            ax.bar(xs, heights, width=width * 0.9, yerr=errs, capsize=2,
                   label=label, color=color)
        plotted[label] = {"x": xs, "mean_steps": heights,
                          "std_steps": errs}
    for x, label, pct in never:
        ax.annotate("never", (x, 0), rotation=90, fontsize=7,
                    ha="center", va="bottom", color="0.4")
    ax.set_xticks(range(len(levels)))
    ax.set_xticklabels([f"{pct}%" for pct in levels])
    ax.set_xlabel("success-rate threshold")
    ax.set_ylabel("training steps to first reach")
    ax.legend(loc="upper left")
    fig.tight_layout()
    return fig, plotted


def plot_budget_curves(bundle: Bundle, metric: str = "sr"):
    """Learning curves across collision budgets (unfiltered runs plus
    the baseline), ordered by budget."""
    rows = {r["label"]: r for r in bundle.summaries}
    wanted = []
    for label in bundle.labels:
        row = rows[label]
        if row["method"] == "SCR" or (row["method"] == "MCB"
                                      and row["tau_deg"] is None):
            wanted.append((0 if row["method"] == "SCR" else row["k"],
                           label))
    wanted.sort()
    fig, plotted = plot_curves(bundle, metric,
                               labels=[lab for _, lab in wanted])
    return fig, plotted


def plot_trajectories(bundle: Bundle, map_id: str | None = None,
                      labels=None, max_per_label: int = 10):
    """Final-checkpoint trajectories over the obstacle map, start marked
    S and goal G."""
    if not bundle.maps:
        raise BundleError("bundle has no maps.json")
    map_id = map_id or sorted(bundle.maps)[0]
    if map_id not in bundle.maps:
        raise BundleError(f"map {map_id!r} not in bundle")
    from matplotlib.patches import Circle, Polygon, Rectangle

    geo = bundle.maps[map_id]
    xmin, ymin, xmax, ymax = geo["bounds"]
    fig, ax = new_axes(figsize=(5.2, 5.2))
    ax.set_xlim(xmin - 0.2, xmax + 0.2)
    ax.set_ylim(ymin - 0.2, ymax + 0.2)
    ax.set_aspect("equal")
    ax.grid(False)
    ax.add_patch(Rectangle((xmin, ymin), xmax - xmin, ymax - ymin,
                           fill=False, edgecolor="black", linewidth=1.5))
    for cx, cy, r in geo["circles"]:
        ax.add_patch(Circle((cx, cy), r, facecolor="0.75",
                            edgecolor="0.4"))
    for verts in geo["polygons"]:
        ax.add_patch(Polygon(verts, closed=True, facecolor="0.75",
                             edgecolor="0.4"))

    trajs = bundle.trajectories
    if labels is not None:
        def label_of(tr):
            if tr["method"] == "SCR":
                return "SCR"
            if tr["tau_deg"] in (None, ""):
                return f"MCB-K{tr['k']}"
            return f"MCB-K{tr['k']}-PF{tr['tau_deg']:g}"

        trajs = [t for t in trajs if label_of(t) in labels]

    plotted = {"map": map_id, "n_trajectories": 0, "trajectories": []}
    seen_labels = {}
    for tr in trajs:
        label = ("SCR" if tr["method"] == "SCR"
                 else f"MCB-K{tr['k']}" if tr["tau_deg"] in (None, "")
                 else f"MCB-K{tr['k']}-PF{tr['tau_deg']:g}")
        count = seen_labels.get(label, 0)
        if count >= max_per_label:
            continue
        seen_labels[label] = count + 1
        poses = np.asarray(tr["poses"], dtype=float)
        color = color_for(label, list(seen_labels).index(label))
        ax.plot(poses[:, 0], poses[:, 1], color=color, linewidth=1.0,
                alpha=0.8, label=label if count == 0 else None)
        sx, sy = tr["start"][0], tr["start"][1]
        gx, gy = tr["goal"]
        ax.annotate("S", (sx, sy), fontsize=8, fontweight="bold",
                    ha="center", va="center")
        ax.annotate("G", (gx, gy), fontsize=8, fontweight="bold",
                    ha="center", va="center", color="darkgreen")
        plotted["n_trajectories"] += 1
        plotted["trajectories"].append(poses)
    if seen_labels:
        ax.legend(loc="upper right")
    fig.tight_layout()
    return fig, plotted
