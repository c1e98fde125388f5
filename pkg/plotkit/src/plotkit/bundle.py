"""Bundle loading and schema validation.

A bundle directory is the contract with the training harness: manifest,
per-seed curves plus cross-seed summaries, steps-to-threshold tables,
pooled replay statistics, final-checkpoint trajectories, and map
geometry. Columns are validated up front so figure code can assume
clean fields.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

SUPPORTED_SCHEMA = 1

CURVES_COLUMNS = {"step", "sr", "av", "ael", "ans", "seed", "method", "k",
                  "tau_deg"}
SUMMARY_COLUMNS = {"label", "method", "k", "tau_deg", "step", "n_seeds",
                   "sr_mean", "sr_std", "av_mean", "av_std", "ael_mean",
                   "ael_std", "ans_mean", "ans_std"}
THRESHOLD_SUMMARY_COLUMNS = {"label", "method", "k", "tau_deg",
                             "threshold_pct", "n_seeds", "n_reached",
                             "mean_steps", "std_steps"}
METRICS = ("sr", "av", "ael", "ans")


class BundleError(ValueError):
    """Missing files or columns in an export bundle."""


def _read_rows(path: Path, required: set[str]) -> list[dict]:
    if not path.exists():
        raise BundleError(f"bundle file missing: {path.name}")
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if rows:
        missing = required - set(rows[0])
        if missing:
            raise BundleError(f"{path.name} lacks columns {sorted(missing)}")
    return rows


def _num(value: str, default=None):
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError:
        return float(value)


@dataclass
class Bundle:
    root: Path
    manifest: dict
    curves: list[dict]
    summaries: list[dict]
    thresholds: list[dict]
    threshold_summaries: list[dict]
    stats_pooled: list[dict]
    trajectories: list[dict] = field(default_factory=list)
    maps: dict = field(default_factory=dict)

    @property
    def labels(self) -> list[str]:
        seen = []
        for row in self.summaries:
            if row["label"] not in seen:
                seen.append(row["label"])
        return seen

    def summary_series(self, label: str, metric: str):
        """(steps, mean, std) arrays for one method label."""
        if metric not in METRICS:
            raise BundleError(f"unknown metric {metric!r}")
        rows = [r for r in self.summaries if r["label"] == label]
        rows.sort(key=lambda r: r["step"])
        steps = [r["step"] for r in rows]
        mean = [r[f"{metric}_mean"] for r in rows]
        std = [r[f"{metric}_std"] for r in rows]
        return steps, mean, std

    def seed_series(self, label_method: str, k: int, tau_deg, metric: str):
        out = {}
        for row in self.curves:
            if (row["method"], row["k"], row["tau_deg"]) != \
                    (label_method, k, tau_deg):
                continue
            out.setdefault(row["seed"], []).append(
                (row["step"], row[metric]))
        for seed in out:
            out[seed].sort()
        return out


def load_bundle(root: str | Path) -> Bundle:
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise BundleError(f"no manifest.json under {root}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise BundleError(f"manifest.json is not valid JSON: {exc}") \
            from exc
    schema = manifest.get("schema_version")
    if schema != SUPPORTED_SCHEMA:
        raise BundleError(f"unsupported bundle schema {schema!r}")

    curves = _read_rows(root / "curves.csv", CURVES_COLUMNS)
    for row in curves:
        row["step"] = _num(row["step"])
        row["seed"] = _num(row["seed"])
        row["k"] = _num(row["k"])
        row["tau_deg"] = _num(row["tau_deg"])
        for m in METRICS:
            row[m] = float(row[m])

    summaries = _read_rows(root / "curves_summary.csv", SUMMARY_COLUMNS)
    for row in summaries:
        row["step"] = _num(row["step"])
        row["k"] = _num(row["k"])
        row["tau_deg"] = _num(row["tau_deg"])
        row["n_seeds"] = _num(row["n_seeds"])
        for m in METRICS:
            row[f"{m}_mean"] = float(row[f"{m}_mean"])
            row[f"{m}_std"] = float(row[f"{m}_std"])

    thresholds = _read_rows(root / "thresholds.csv",
                            {"method", "k", "tau_deg", "seed",
                             "threshold_pct", "steps"})
    for row in thresholds:
        row["k"] = _num(row["k"])
        row["seed"] = _num(row["seed"])
        row["tau_deg"] = _num(row["tau_deg"])
        row["threshold_pct"] = _num(row["threshold_pct"])
        row["steps"] = _num(row["steps"])

    tsummaries = _read_rows(root / "thresholds_summary.csv",
                            THRESHOLD_SUMMARY_COLUMNS)
    for row in tsummaries:
        row["k"] = _num(row["k"])
        row["tau_deg"] = _num(row["tau_deg"])
        row["threshold_pct"] = _num(row["threshold_pct"])
        row["n_seeds"] = _num(row["n_seeds"])
        row["n_reached"] = _num(row["n_reached"])
        row["mean_steps"] = _num(row["mean_steps"])
        row["std_steps"] = _num(row["std_steps"])

    stats_pooled = _read_rows(root / "stats_pooled.csv",
                              {"label", "k", "tau_deg",
                               "pf_filtered_ratio_pct"})

    trajectories = []
    traj_path = root / "trajectories.jsonl"
    if traj_path.exists():
        trajectories = [json.loads(line) for line in
                        traj_path.read_text().splitlines() if line.strip()]

    maps = {}
    maps_path = root / "maps.json"
    if maps_path.exists():
        maps = json.loads(maps_path.read_text())

    return Bundle(root=root, manifest=manifest, curves=curves,
                  summaries=summaries, thresholds=thresholds,
                  threshold_summaries=tsummaries,
                  stats_pooled=stats_pooled, trajectories=trajectories,
                  maps=maps)
