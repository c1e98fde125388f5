"""Command line entry points: train, eval, ablate, export.

Exit codes: 0 success, 2 configuration error, 3 runtime failure. The run
root defaults to $MCBNAV_RUN_ROOT or ./runs. Completed runs (matching
config hash) are skipped unless --force is given, so interrupted suites
resume where they stopped.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .config import ConfigError, ExperimentConfig, PROFILES
from .evalkit import make_task_set, run_eval
from .export import (
    discover_runs,
    export_bundle,
    final_metric_rows,
    pooled_stats,
    sr_range_rows,
    RunRecord,
    _write_csv,
)
from .sac import CheckpointError, SACLearner
from .train import EVAL_CSV_COLUMNS, run_is_complete, train_run
from .world import resolve_map

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def default_run_root() -> Path:
    return Path(os.environ.get("MCBNAV_RUN_ROOT", "runs"))


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config, profile=args.profile)
    else:
        cfg = ExperimentConfig.from_dict({}, profile=args.profile)
    overrides = list(args.set or [])
    for key in ("method", "k", "tau_deg", "map", "name"):
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            overrides.append(f"{key}={value}")
    if getattr(args, "seeds", None):
        overrides.append(f"seeds=[{args.seeds}]")
    if overrides:
        cfg = cfg.apply_overrides(overrides)
    return cfg


def _seed_dir(root: Path, cfg: ExperimentConfig, seed: int) -> Path:
    return root / cfg.raw["name"] / cfg.label / f"seed{seed}"


def _train_one(payload) -> str:
    cfg_raw, seed, run_dir, quiet = payload
    cfg = ExperimentConfig(raw=cfg_raw)
    label = cfg.label

    def progress(step, result):
        if not quiet:
            print(f"[{label} seed{seed}] step {step}/"
                  f"{cfg.raw['total_steps']} sr={result.sr:.2f} "
                  f"ans={result.ans:.2f}", flush=True)

    # one BLAS thread per worker: the update's small matmuls lose more to
    # thread sync than they gain, and workers already fill the cores
    with threadpool_limits(limits=1):
        train_run(cfg, seed, Path(run_dir), progress=progress)
    return str(run_dir)


def run_training(cfg: ExperimentConfig, root: Path, workers: int = 1,
                 force: bool = False, quiet: bool = False) -> list[Path]:
    """Train every seed of an experiment, skipping completed runs."""
    jobs = []
    dirs = []
    for seed in cfg.raw["seeds"]:
        run_dir = _seed_dir(root, cfg, seed)
        dirs.append(run_dir)
        if not force and run_is_complete(run_dir, cfg.config_hash()):
            if not quiet:
                print(f"[{cfg.label} seed{seed}] complete, skipping "
                      f"({run_dir})", flush=True)
            continue
        jobs.append((cfg.raw, seed, str(run_dir), quiet))
    if not jobs:
        return dirs
    if workers <= 1 or len(jobs) == 1:
        for job in jobs:
            _train_one(job)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for _ in pool.map(_train_one, jobs):
                pass
    return dirs


def cmd_train(args) -> int:
    cfg = _load_config(args)
    root = Path(args.run_root) if args.run_root else default_run_root()
    dirs = run_training(cfg, root, workers=args.workers, force=args.force,
                        quiet=args.quiet)
    print(root / cfg.raw["name"])
    return EXIT_OK


def cmd_eval(args) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.exists():
        raise ConfigError(f"checkpoint not found: {ckpt}")
    cfg = _load_config(args)
    learner, step = SACLearner.load_checkpoint(ckpt)
    world = resolve_map(cfg.raw["map"])
    tasks = make_task_set(world, int(cfg.raw["eval"]["n_tasks"]),
                          int(cfg.raw["eval"]["task_seed"]),
                          cfg.scenario_config())
    rng = np.random.default_rng(args.sample_seed)
    if args.sample_actions:
        policy = (lambda obs: learner.act(obs, rng=rng))
    else:
        policy = (lambda obs: learner.act(obs, deterministic=True))
    result = run_eval(policy, world, tasks, cfg.sim_params(),
                      int(cfg.raw["t_max"]), strict=not args.no_strict)
    row = {"step": step, "sr": result.sr, "av": result.av,
           "ael": result.ael, "ans": result.ans, "seed": args.seed,
           "method": cfg.method, "k": cfg.effective_k,
           "tau_deg": cfg.tau_deg}
    out = Path(args.out) if args.out else None
    if out:
        header = not out.exists()
        with open(out, "a", newline="") as fh:
            if header:
                fh.write(",".join(EVAL_CSV_COLUMNS) + "\n")
            fh.write(",".join(
                "" if row[c] is None else
                (repr(row[c]) if isinstance(row[c], float) else str(row[c]))
                for c in EVAL_CSV_COLUMNS) + "\n")
    print(json.dumps({c: row[c] for c in EVAL_CSV_COLUMNS}))
    return EXIT_OK


def _parse_grid(text: str) -> list:
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        values.append(None if part.lower() == "none" else float(part))
    return values


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    root = Path(args.run_root) if args.run_root else default_run_root()
    k_values = [int(v) for v in _parse_grid(args.k_grid)]
    tau_values = _parse_grid(args.tau_grid)
    cells = []
    if args.include_scr:
        cells.append(("SCR", 1, None))
    for tau in tau_values:
        for k in k_values:
            method = "MCB" if tau is None else "MCB-PF"
            cells.append((method, k, tau))

    all_dirs = []
    for method, k, tau in cells:
        overrides = [f"method={method}", f"k={k}"]
        if tau is not None:
            overrides.append(f"tau_deg={tau}")
        cell_cfg = cfg.apply_overrides(overrides)
        all_dirs.extend(run_training(cell_cfg, root, workers=args.workers,
                                     force=args.force, quiet=args.quiet))

    records = [RunRecord(d) for d in discover_runs(all_dirs)
               if run_is_complete(d)]
    out_dir = root / cfg.raw["name"] / "ablation"
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "ablation_cells.csv",
               ("method", "k", "tau_deg", "seed", "step", "sr", "av",
                "ael", "ans"), final_metric_rows(records))
    _write_csv(out_dir / "sr_range.csv",
               ("tau_deg", "n_budgets", "sr_range"), sr_range_rows(records))
    _write_csv(out_dir / "replay_stats_pooled.csv",
               ("label", "method", "k", "tau_deg", "n_seeds",
                "total_generated", "collision_candidates", "pf_filtered",
                "bridge_omitted", "stored_total", "stored_collisions",
                "candidate_ratio_pct", "pf_filtered_ratio_pct",
                "stored_collision_ratio_pct", "candidate_ratio_stored_pct"),
               pooled_stats(records))
    print(out_dir)
    return EXIT_OK


def cmd_export(args) -> int:
    manifest = export_bundle([Path(p) for p in args.runs], Path(args.out))
    if manifest["gaps"]:
        for gap in manifest["gaps"]:
            print(f"note: gap in bundle: {gap['run_dir']}: "
                  f"{gap['problem']}", file=sys.stderr)
    print(args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcbnav",
        description="Collision-reset training workbench for mapless "
                    "navigation")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p):
        p.add_argument("-c", "--config", help="experiment YAML file")
        p.add_argument("--profile", choices=sorted(PROFILES),
                       help="apply a named step/seed profile")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config field (dotted keys)")
        p.add_argument("--method", choices=("SCR", "MCB", "MCB-PF"))
        p.add_argument("--k", type=int)
        p.add_argument("--tau-deg", type=float, dest="tau_deg")
        p.add_argument("--map")
        p.add_argument("--name")

    p_train = sub.add_parser("train", help="train one method over its seeds")
    add_config_args(p_train)
    p_train.add_argument("--seeds", help="comma-separated seed list")
    p_train.add_argument("--run-root")
    p_train.add_argument("--workers", type=int, default=1)
    p_train.add_argument("--force", action="store_true",
                         help="re-run completed runs")
    p_train.add_argument("--quiet", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    add_config_args(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--out", help="CSV to append the result row to")
    p_eval.add_argument("--seed", type=int, default=0,
                        help="seed column value for the CSV row")
    p_eval.add_argument("--sample-actions", action="store_true",
                        help="sample the policy instead of using its mean")
    p_eval.add_argument("--sample-seed", type=int, default=0)
    p_eval.add_argument("--no-strict", action="store_true")
    p_eval.set_defaults(func=cmd_eval)

    p_abl = sub.add_parser("ablate",
                           help="run a budget/filter grid and summarize")
    add_config_args(p_abl)
    p_abl.add_argument("--k-grid", default="2,3,5,10,50",
                       help="comma-separated collision budgets")
    p_abl.add_argument("--tau-grid", default="none",
                       help="comma-separated degrees; 'none' disables PF")
    p_abl.add_argument("--include-scr", action="store_true")
    p_abl.add_argument("--seeds", help="comma-separated seed list")
    p_abl.add_argument("--run-root")
    p_abl.add_argument("--workers", type=int, default=1)
    p_abl.add_argument("--force", action="store_true")
    p_abl.add_argument("--quiet", action="store_true")
    p_abl.set_defaults(func=cmd_ablate)

    p_exp = sub.add_parser("export",
                           help="consolidate run dirs into a plot bundle")
    p_exp.add_argument("--runs", nargs="+", required=True,
                       help="run dirs or parents of run dirs")
    p_exp.add_argument("--out", required=True)
    p_exp.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CheckpointError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # runtime failures map to exit code 3
        print(f"runtime failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
