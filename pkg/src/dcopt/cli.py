"""Command line entry point for the experiment harness."""

from __future__ import annotations

import argparse
import json
import sys

from .harness import ExperimentConfig, emit_outputs, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcopt", description="Benchmark harness for the DC solvers")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment described by a config file")
    run.add_argument("--config", required=True, help="JSON config file")
    run.add_argument("--seed", type=int, default=None, help="master seed override")
    run.add_argument("--out", default=None, help="output directory override")
    run.add_argument("--solver", choices=["psalmdc", "dca", "both"], default=None)
    run.add_argument("--time-limit", type=float, default=None,
                     help="per-run time limit in seconds")
    run.add_argument("--parallel", type=int, default=None,
                     help="number of concurrent instances")
    return parser


def _load_config(args) -> ExperimentConfig:
    with open(args.config) as handle:
        data = json.load(handle)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["out_dir"] = args.out
    if args.solver is not None:
        data["solver"] = args.solver
    if args.time_limit is not None:
        data["time_limit"] = args.time_limit
    if args.parallel is not None:
        data["parallel"] = args.parallel
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args)
    except (OSError, ValueError, TypeError, json.JSONDecodeError) as error:
        print(f"error: {error}", file=sys.stderr)
        return 1
    try:
        records, summary = run_experiment(config)
        emit_outputs(records, summary, config.out_dir)
    except OSError as error:
        print(f"error: {error}", file=sys.stderr)
        return 1
    for cell in sorted(summary):
        for solver_name in sorted(summary[cell]):
            entry = summary[cell][solver_name]
            print(f"{cell} {solver_name}: {entry['successes']}/{entry['runs']} "
                  f"successes")
    print(f"results written to {config.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
