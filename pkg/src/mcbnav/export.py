"""Run-directory readers and the consolidated export bundle.

The bundle is the only interface the plotting component consumes: curves
and their cross-seed summaries, steps-to-threshold tables, final replay
statistics (per seed and pooled), final-checkpoint trajectories, and map
geometry. Re-exporting the same runs yields byte-identical files: rows
are fully sorted and floats use shortest round-trip formatting.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import yaml

from .evalkit import steps_to_threshold
from .world import resolve_map

BUNDLE_SCHEMA = 1
THRESHOLDS_PCT = (50, 70, 80)

CURVE_COLUMNS = ("step", "sr", "av", "ael", "ans", "seed", "method", "k",
                 "tau_deg")
SUMMARY_METRICS = ("sr", "av", "ael", "ans")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_csv(path: Path) -> list[dict]:
    """Read a run CSV, skipping the leading config-hash comment."""
    with open(path) as fh:
        rows = [r for r in fh if not r.startswith("#")]
    return list(csv.DictReader(rows))


def discover_runs(paths: list[str | Path]) -> list[Path]:
    """Expand run dirs and parents of run dirs into a sorted run list."""
    found = set()
    for p in paths:
        p = Path(p)
        if (p / "run_meta.json").exists():
            found.add(p.resolve())
            continue
        for meta in p.rglob("run_meta.json"):
            found.add(meta.parent.resolve())
    return sorted(found)


class RunRecord:
    """Lazy view over one completed run directory."""

    def __init__(self, run_dir: Path):
        self.run_dir = Path(run_dir)
        self.meta = json.loads((self.run_dir / "run_meta.json").read_text())
        self.seed = int(self.meta["seed"])
        self.method = self.meta["method"]
        self.k = int(self.meta["k"])
        self.tau_deg = self.meta.get("tau_deg")
        self.label = self.meta["label"]

    @property
    def group(self) -> tuple:
        tau = -1.0 if self.tau_deg is None else float(self.tau_deg)
        return (self.method, self.k, tau)

    def sort_key(self) -> tuple:
        return (*self.group, self.seed)

    def eval_rows(self) -> list[dict]:
        rows = read_csv(self.run_dir / "eval.csv")
        for r in rows:
            r["step"] = int(r["step"])
            for m in SUMMARY_METRICS:
                r[m] = float(r[m])
        return sorted(rows, key=lambda r: r["step"])

    def sr_curve(self) -> list[tuple[int, float]]:
        return [(r["step"], r["sr"]) for r in self.eval_rows()]

    def final_stats(self) -> dict:
        rows = read_csv(self.run_dir / "stats.csv")
        if not rows:
            return {}
        last = max(rows, key=lambda r: int(r["step"]))
        return {key: (int(val) if val.isdigit() else float(val))
                for key, val in last.items()}

    def trajectories(self) -> list[dict]:
        path = self.run_dir / "trajectories.jsonl"
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text().splitlines()
                if line.strip()]

    def is_complete(self) -> bool:
        return ((self.run_dir / "done.json").exists()
                and (self.run_dir / "eval.csv").exists())

    def map_ref(self) -> str:
        cfg = yaml_safe_load(self.run_dir / "config.yaml")
        return cfg["map"]

    def config(self) -> dict:
        return yaml_safe_load(self.run_dir / "config.yaml")


def yaml_safe_load(path: Path) -> dict:
    with open(path) as fh:
        return yaml.safe_load(fh)


def _write_csv(path: Path, columns, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])


def group_label(method: str, k: int, tau_deg) -> str:
    if method == "SCR":
        return "SCR"
    if tau_deg is None or (isinstance(tau_deg, float) and tau_deg < 0):
        return f"MCB-K{k}"
    return f"MCB-K{k}-PF{tau_deg:g}"


def curve_summaries(records: list["RunRecord"]) -> list[dict]:
    """Cross-seed mean and population std per (group, step, metric)."""
    groups: dict[tuple, dict[int, list[dict]]] = {}
    for rec in records:
        by_step = groups.setdefault(rec.group, {})
        for row in rec.eval_rows():
            by_step.setdefault(row["step"], []).append(row)
    out = []
    for group in sorted(groups):
        method, k, tau = group
        tau_out = None if tau < 0 else tau
        label = group_label(method, k, tau_out)
        for step in sorted(groups[group]):
            rows = groups[group][step]
            entry = {"label": label, "method": method, "k": k,
                     "tau_deg": tau_out, "step": step,
                     "n_seeds": len(rows)}
            for m in SUMMARY_METRICS:
                vals = np.array([r[m] for r in rows])
                entry[f"{m}_mean"] = float(vals.mean())
                entry[f"{m}_std"] = float(vals.std(ddof=0))
            out.append(entry)
    return out


def threshold_rows(records: list["RunRecord"]) -> list[dict]:
    rows = []
    for rec in sorted(records, key=lambda r: r.sort_key()):
        curve = rec.sr_curve()
        for pct in THRESHOLDS_PCT:
            steps = steps_to_threshold(curve, pct / 100.0)
            rows.append({"method": rec.method, "k": rec.k,
                         "tau_deg": rec.tau_deg, "seed": rec.seed,
                         "threshold_pct": pct, "steps": steps})
    return rows


def threshold_summaries(records: list["RunRecord"]) -> list[dict]:
    """Mean/std of steps-to-threshold over the seeds that reached it."""
    per = threshold_rows(records)
    groups: dict[tuple, list[dict]] = {}
    for row in per:
        tau = -1.0 if row["tau_deg"] is None else float(row["tau_deg"])
        key = (row["method"], row["k"], tau, row["threshold_pct"])
        groups.setdefault(key, []).append(row)
    out = []
    for key in sorted(groups):
        method, k, tau, pct = key
        tau_out = None if tau < 0 else tau
        rows = groups[key]
        reached = [r["steps"] for r in rows if r["steps"] is not None]
        entry = {"label": group_label(method, k, tau_out),
                 "method": method, "k": k, "tau_deg": tau_out,
                 "threshold_pct": pct, "n_seeds": len(rows),
                 "n_reached": len(reached),
                 "mean_steps": (float(np.mean(reached)) if reached
                                else None),
                 "std_steps": (float(np.std(reached, ddof=0)) if reached
                               else None)}
        out.append(entry)
    return out


def pooled_stats(records: list["RunRecord"]) -> list[dict]:
    """Replay statistics with counts summed over seeds per group."""
    count_keys = ("total_generated", "collision_candidates", "pf_filtered",
                  "bridge_omitted", "stored_total", "stored_collisions")
    groups: dict[tuple, dict] = {}
    for rec in sorted(records, key=lambda r: r.sort_key()):
        stats = rec.final_stats()
        if not stats:
            continue
        acc = groups.setdefault(rec.group,
                                {key: 0 for key in count_keys} | {"n": 0})
        for key in count_keys:
            acc[key] += int(stats.get(key, 0))
        acc["n"] += 1
    out = []
    for group in sorted(groups):
        method, k, tau = group
        tau_out = None if tau < 0 else tau
        acc = groups[group]
        gen, cand = acc["total_generated"], acc["collision_candidates"]
        stored = acc["stored_total"]
        out.append({
            "label": group_label(method, k, tau_out), "method": method,
            "k": k, "tau_deg": tau_out, "n_seeds": acc["n"],
            **{key: acc[key] for key in count_keys},
            "candidate_ratio_pct": 100.0 * cand / gen if gen else 0.0,
            "pf_filtered_ratio_pct":
                100.0 * acc["pf_filtered"] / cand if cand else 0.0,
            "stored_collision_ratio_pct":
                100.0 * acc["stored_collisions"] / stored if stored else 0.0,
            "candidate_ratio_stored_pct":
                100.0 * cand / stored if stored else 0.0,
        })
    return out


def final_metric_rows(records: list["RunRecord"]) -> list[dict]:
    """Final-checkpoint metrics per run (the ablation cell values)."""
    rows = []
    for rec in sorted(records, key=lambda r: r.sort_key()):
        evals = rec.eval_rows()
        if not evals:
            continue
        last = evals[-1]
        rows.append({"method": rec.method, "k": rec.k,
                     "tau_deg": rec.tau_deg, "seed": rec.seed,
                     "step": last["step"],
                     **{m: last[m] for m in SUMMARY_METRICS}})
    return rows


def sr_range_rows(records: list["RunRecord"]) -> list[dict]:
    """Spread of mean final SR across budgets, per filter setting."""
    finals = final_metric_rows(records)
    by_cell: dict[tuple, list[float]] = {}
    for row in finals:
        if row["method"] == "SCR":
            continue
        tau = -1.0 if row["tau_deg"] is None else float(row["tau_deg"])
        by_cell.setdefault((tau, row["k"]), []).append(row["sr"])
    by_tau: dict[float, list[float]] = {}
    for (tau, _k), srs in sorted(by_cell.items()):
        by_tau.setdefault(tau, []).append(float(np.mean(srs)))
    rows = []
    for tau in sorted(by_tau):
        means = by_tau[tau]
        rows.append({"tau_deg": None if tau < 0 else tau,
                     "n_budgets": len(means),
                     "sr_range": max(means) - min(means)})
    return rows


def export_bundle(run_dirs: list[Path], out_dir: Path) -> dict:
    """Write the consolidated CSV/JSON bundle consumed by the plot kit."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    gaps = []
    for run_dir in discover_runs(run_dirs):
        try:
            rec = RunRecord(run_dir)
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            gaps.append({"run_dir": str(run_dir), "problem": str(exc)})
            continue
        if not rec.is_complete():
            gaps.append({"run_dir": str(run_dir),
                         "problem": "run incomplete (no done.json/eval.csv)"})
            continue
        records.append(rec)
    records.sort(key=lambda r: r.sort_key())

    curve_rows = []
    for rec in records:
        for row in rec.eval_rows():
            curve_rows.append({**{c: row.get(c) for c in CURVE_COLUMNS},
                               "seed": rec.seed, "method": rec.method,
                               "k": rec.k, "tau_deg": rec.tau_deg})
    _write_csv(out_dir / "curves.csv", CURVE_COLUMNS, curve_rows)

    summaries = curve_summaries(records)
    summary_cols = ("label", "method", "k", "tau_deg", "step", "n_seeds")
    summary_cols += tuple(f"{m}_{s}" for m in SUMMARY_METRICS
                          for s in ("mean", "std"))
    _write_csv(out_dir / "curves_summary.csv", summary_cols, summaries)

    _write_csv(out_dir / "thresholds.csv",
               ("method", "k", "tau_deg", "seed", "threshold_pct", "steps"),
               threshold_rows(records))
    _write_csv(out_dir / "thresholds_summary.csv",
               ("label", "method", "k", "tau_deg", "threshold_pct",
                "n_seeds", "n_reached", "mean_steps", "std_steps"),
               threshold_summaries(records))

    stats_cols = ("method", "k", "tau_deg", "seed", "total_generated",
                  "collision_candidates", "candidate_ratio_pct",
                  "pf_filtered", "pf_filtered_ratio_pct", "bridge_omitted",
                  "stored_total", "stored_collisions",
                  "stored_collision_ratio_pct", "candidate_ratio_stored_pct")
    stat_rows = []
    for rec in records:
        stats = rec.final_stats()
        if stats:
            stat_rows.append({"method": rec.method, "k": rec.k,
                              "tau_deg": rec.tau_deg, "seed": rec.seed,
                              **{key: stats.get(key) for key in stats_cols
                                 if key in stats}})
    _write_csv(out_dir / "stats.csv", stats_cols, stat_rows)
    pooled_cols = ("label", "method", "k", "tau_deg", "n_seeds",
                   "total_generated", "collision_candidates", "pf_filtered",
                   "bridge_omitted", "stored_total", "stored_collisions",
                   "candidate_ratio_pct", "pf_filtered_ratio_pct",
                   "stored_collision_ratio_pct",
                   "candidate_ratio_stored_pct")
    _write_csv(out_dir / "stats_pooled.csv", pooled_cols,
               pooled_stats(records))

    with open(out_dir / "trajectories.jsonl", "w") as fh:
        for rec in records:
            for traj in rec.trajectories():
                fh.write(json.dumps(
                    {"method": rec.method, "k": rec.k,
                     "tau_deg": rec.tau_deg, "seed": rec.seed, **traj},
                    sort_keys=True) + "\n")

    maps = {}
    for rec in records:
        ref = rec.map_ref()
        if ref in maps:
            continue
        world = resolve_map(ref)
        maps[ref] = {
            "bounds": list(world.bounds),
            "circles": [list(c) for c in world.circles],
            "polygons": [np.asarray(p).tolist() for p in world.polygons],
        }
    (out_dir / "maps.json").write_text(
        json.dumps(maps, sort_keys=True, indent=1) + "\n")

    manifest = {
        "schema_version": BUNDLE_SCHEMA,
        "runs": [{"run_dir": rec.run_dir.name, "method": rec.method,
                  "k": rec.k, "tau_deg": rec.tau_deg, "seed": rec.seed,
                  "label": rec.label,
                  "config_hash": rec.meta["config_hash"]}
                 for rec in records],
        "gaps": sorted(gaps, key=lambda g: g["run_dir"]),
        "thresholds_pct": list(THRESHOLDS_PCT),
        "files": ["curves.csv", "curves_summary.csv", "thresholds.csv",
                  "thresholds_summary.csv", "stats.csv", "stats_pooled.csv",
                  "trajectories.jsonl", "maps.json"],
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return manifest
