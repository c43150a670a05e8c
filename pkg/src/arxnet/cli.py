"""Command-line interface: simulate, infer, evaluate, montecarlo."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ArxnetError
from .harness import (
    CampaignReport,
    ExperimentConfig,
    cmd_evaluate,
    cmd_infer,
    cmd_montecarlo,
    cmd_simulate,
)


def _load_config(args) -> ExperimentConfig:
    if args.config:
        config = ExperimentConfig.from_file(args.config)
    else:
        config = ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        config.master_seed = args.seed
    if getattr(args, "solver", None):
        config.solver = args.solver
    if getattr(args, "mode", None):
        config.mode = args.mode
    if getattr(args, "modes", None):
        config.modes = tuple(args.modes.split(","))
    if getattr(args, "jobs", None):
        config.jobs = args.jobs
    if getattr(args, "fix_lambda", False):
        config.fix_lambda = True
    if getattr(args, "emit_curves", False):
        config.emit_curves = True
    return config


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="experiment config JSON")
    parser.add_argument("--seed", type=int, help="override master seed")
    parser.add_argument("--solver", choices=["cccp", "admm", "em"], help="override solver")
    parser.add_argument("--mode", choices=["gesbl", "sbl", "gsbl"], help="override prior mode")
    parser.add_argument("--modes", help="comma list for a paired mode sweep")
    parser.add_argument("--jobs", type=int, help="worker processes")
    parser.add_argument("--fix-lambda", action="store_true", dest="fix_lambda",
                        help="hold the noise variance at its initial estimate")
    parser.add_argument("--emit-curves", action="store_true", dest="emit_curves",
                        help="write ROC / precision-recall curve points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arxnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate networks and time series")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("infer", help="run per-node inference on simulated or custom data")
    _add_common(p)
    p.add_argument("--data", required=True, help="campaign directory or single run directory")
    p.add_argument("--out", help="output directory (defaults to the data directory)")

    p = sub.add_parser("evaluate", help="score inference results against ground truth")
    _add_common(p)
    p.add_argument("--runs", required=True, help="campaign directory")
    p.add_argument("--out", help="report JSON path")

    p = sub.add_parser("montecarlo", help="simulate + infer + evaluate end to end")
    _add_common(p)
    p.add_argument("--out", help="output directory (omit for in-memory evaluation)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args)
        if args.command == "simulate":
            written = cmd_simulate(config, args.out)
            print(f"wrote {len(written)} runs under {args.out}")
        elif args.command == "infer":
            records = cmd_infer(config, args.data, args.out)
            failures = [r for r in records if r["errors"]]
            print(f"inferred {len(records)} run/mode combinations, {len(failures)} with node failures")
            if failures:
                for r in failures:
                    print(f"  {r['run']} [{r['mode']}]: {'; '.join(r['errors'])}", file=sys.stderr)
        elif args.command == "evaluate":
            report = cmd_evaluate(config, args.runs, args.out)
            print(report.format_table())
        elif args.command == "montecarlo":
            report = cmd_montecarlo(config, args.out, jobs=config.jobs)
            print(report.format_table())
        return 0
    except (ArxnetError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
