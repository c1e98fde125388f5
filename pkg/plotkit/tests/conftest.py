import csv
import json
from pathlib import Path

import pytest

# three methods, two seeds, five checkpoints; SR values chosen so that
# SCR crosses 50% at 4000, MCB-K2 at 2000, and MCB-K50 never does
SR = {
    ("SCR", 1, None, 0): [0.1, 0.3, 0.5, 0.7, 0.8],
    ("SCR", 1, None, 1): [0.0, 0.2, 0.6, 0.6, 0.9],
    ("MCB", 2, None, 0): [0.2, 0.6, 0.7, 0.8, 0.9],
    ("MCB", 2, None, 1): [0.3, 0.5, 0.8, 0.9, 1.0],
    ("MCB", 50, None, 0): [0.0, 0.1, 0.2, 0.3, 0.4],
    ("MCB", 50, None, 1): [0.1, 0.0, 0.3, 0.2, 0.4],
}
STEPS = [1000, 2000, 3000, 4000, 5000]
LABELS = {("SCR", 1, None): "SCR", ("MCB", 2, None): "MCB-K2",
          ("MCB", 50, None): "MCB-K50"}
# first step with sr >= threshold per (label, pct), averaged over seeds
THRESH = {
    ("SCR", 50): ([3000, 3000], 3000.0, 0.0),
    ("SCR", 70): ([4000, 5000], 4500.0, 500.0),
    ("SCR", 80): ([5000, 5000], 5000.0, 0.0),
    ("MCB-K2", 50): ([2000, 2000], 2000.0, 0.0),
    ("MCB-K2", 70): ([3000, 3000], 3000.0, 0.0),
    ("MCB-K2", 80): ([4000, 3000], 3500.0, 500.0),
    ("MCB-K50", 50): (None, None, None),
    ("MCB-K50", 70): (None, None, None),
    ("MCB-K50", 80): (None, None, None),
}


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([("" if row.get(c) is None else row.get(c))
                        for c in columns])


@pytest.fixture(scope="session")
def synthetic_bundle(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("bundle")
    curve_cols = ("step", "sr", "av", "ael", "ans", "seed", "method", "k",
                  "tau_deg")
    rows = []
    for (method, k, tau, seed), srs in SR.items():
        for step, sr in zip(STEPS, srs):
            rows.append({"step": step, "sr": sr, "av": 0.3 + 0.1 * sr,
                         "ael": 150 - 80 * sr, "ans": 2 * sr - 1,
                         "seed": seed, "method": method, "k": k,
                         "tau_deg": tau})
    _write_csv(root / "curves.csv", curve_cols, rows)

    sum_cols = ("label", "method", "k", "tau_deg", "step", "n_seeds",
                "sr_mean", "sr_std", "av_mean", "av_std", "ael_mean",
                "ael_std", "ans_mean", "ans_std")
    sum_rows = []
    for group, label in LABELS.items():
        method, k, tau = group
        for i, step in enumerate(STEPS):
            a = SR[(method, k, tau, 0)][i]
            b = SR[(method, k, tau, 1)][i]
            mean = (a + b) / 2
            std = abs(a - b) / 2  # population std of two points
            row = {"label": label, "method": method, "k": k,
                   "tau_deg": tau, "step": step, "n_seeds": 2,
                   "sr_mean": mean, "sr_std": std}
            for m, lo, hi in (("av", 0.3, 0.1), ("ael", 150, -80),
                              ("ans", -1, 2)):
                va = lo + hi * a
                vb = lo + hi * b
                row[f"{m}_mean"] = (va + vb) / 2
                row[f"{m}_std"] = abs(va - vb) / 2
            sum_rows.append(row)
    _write_csv(root / "curves_summary.csv", sum_cols, sum_rows)

    thr_rows, thr_sum_rows = [], []
    for group, label in LABELS.items():
        method, k, tau = group
        for pct in (50, 70, 80):
            per_seed, mean, std = THRESH[(label, pct)]
            for seed in (0, 1):
                thr_rows.append({"method": method, "k": k, "tau_deg": tau,
                                 "seed": seed, "threshold_pct": pct,
                                 "steps": (per_seed[seed] if per_seed
                                           else None)})
            thr_sum_rows.append({"label": label, "method": method, "k": k,
                                 "tau_deg": tau, "threshold_pct": pct,
                                 "n_seeds": 2,
                                 "n_reached": 2 if per_seed else 0,
                                 "mean_steps": mean, "std_steps": std})
    _write_csv(root / "thresholds.csv",
               ("method", "k", "tau_deg", "seed", "threshold_pct",
                "steps"), thr_rows)
    _write_csv(root / "thresholds_summary.csv",
               ("label", "method", "k", "tau_deg", "threshold_pct",
                "n_seeds", "n_reached", "mean_steps", "std_steps"),
               thr_sum_rows)

    _write_csv(root / "stats_pooled.csv",
               ("label", "method", "k", "tau_deg", "n_seeds",
                "total_generated", "collision_candidates", "pf_filtered",
                "bridge_omitted", "stored_total", "stored_collisions",
                "candidate_ratio_pct", "pf_filtered_ratio_pct",
                "stored_collision_ratio_pct",
                "candidate_ratio_stored_pct"),
               [{"label": "SCR", "method": "SCR", "k": 1, "tau_deg": None,
                 "n_seeds": 2, "total_generated": 10000,
                 "collision_candidates": 100, "pf_filtered": 0,
                 "bridge_omitted": 0, "stored_total": 10000,
                 "stored_collisions": 100, "candidate_ratio_pct": 1.0,
                 "pf_filtered_ratio_pct": 0.0,
                 "stored_collision_ratio_pct": 1.0,
                 "candidate_ratio_stored_pct": 1.0}])

    straight = [[1.0 + 0.1 * i, 2.0, 0.0] for i in range(30)]
    with open(root / "trajectories.jsonl", "w") as fh:
        fh.write(json.dumps({"method": "SCR", "k": 1, "tau_deg": None,
                             "seed": 0, "task": 0, "outcome": "success",
                             "steps": 29, "score": 0.5,
                             "start": [1.0, 2.0, 0.0],
                             "goal": [4.0, 2.0], "poses": straight}) + "\n")
        fh.write(json.dumps({"method": "MCB", "k": 2, "tau_deg": None,
                             "seed": 0, "task": 1, "outcome": "collision",
                             "steps": 3, "score": -1.0,
                             "start": [2.0, 1.0, 1.0], "goal": [3.0, 5.0],
                             "poses": [[2.0, 1.0, 1.0], [2.1, 1.2, 1.1],
                                       [2.2, 1.4, 1.2]]}) + "\n")

    (root / "maps.json").write_text(json.dumps(
        {"toy": {"bounds": [0, 0, 6, 6],
                 "circles": [[3.0, 3.0, 0.5]],
                 "polygons": [[[1, 1], [2, 1], [2, 2], [1, 2]]]}}))
    (root / "manifest.json").write_text(json.dumps(
        {"schema_version": 1, "thresholds_pct": [50, 70, 80],
         "runs": [], "gaps": []}))
    return root
