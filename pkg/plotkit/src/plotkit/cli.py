"""Figure CLI: one subcommand per figure type.

    mcbnav-plot curves --bundle DIR --metric sr --out figs/curves_sr
    mcbnav-plot thresholds --bundle DIR --out figs/thresholds
    mcbnav-plot budgets --bundle DIR --out figs/budget_curves
    mcbnav-plot trajectories --bundle DIR --map desk_clutter --out figs/traj

Each command writes <out>.pdf and <out>.png.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bundle import BundleError, load_bundle
from .figures import (
    plot_budget_curves,
    plot_curves,
    plot_thresholds,
    plot_trajectories,
)
from .theme import save_figure


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcbnav-plot")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--bundle", required=True,
                       help="export bundle directory")
        p.add_argument("--out", required=True,
                       help="output path base (no extension)")
        p.add_argument("--labels", help="comma-separated method labels")

    p = sub.add_parser("curves", help="learning curves with seed bands")
    common(p)
    p.add_argument("--metric", default="sr",
                   choices=("sr", "av", "ael", "ans"))

    p = sub.add_parser("thresholds",
                       help="steps to reach SR thresholds, with error bars")
    common(p)

    p = sub.add_parser("budgets",
                       help="learning curves across collision budgets")
    common(p)
    p.add_argument("--metric", default="sr",
                   choices=("sr", "av", "ael", "ans"))

    p = sub.add_parser("trajectories",
                       help="final-checkpoint trajectories over the map")
    common(p)
    p.add_argument("--map", dest="map_id")
    p.add_argument("--max-per-label", type=int, default=10)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        bundle = load_bundle(args.bundle)
        labels = args.labels.split(",") if args.labels else None
        if args.command == "curves":
            fig, _ = plot_curves(bundle, args.metric, labels=labels)
        elif args.command == "thresholds":
            fig, _ = plot_thresholds(bundle, labels=labels)
        elif args.command == "budgets":
            fig, _ = plot_budget_curves(bundle, args.metric)
        else:
            fig, _ = plot_trajectories(bundle, map_id=args.map_id,
                                       labels=labels,
                                       max_per_label=args.max_per_label)
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        for path in save_figure(fig, args.out):
            print(path)
        return 0
    except BundleError as exc:
        print(f"bundle error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
