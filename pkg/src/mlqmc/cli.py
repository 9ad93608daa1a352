"""Command-line entry point: run experiments, compare methods, refit rates."""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from .errors import ConfigError, MaxLevelExceededError, SolverDivergenceError
from .experiment import (
    OUTPUT_DIR_ENV,
    compare_methods,
    parse_config,
    rates_from_levels_csv,
    run_experiment,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlqmc",
        description="Multilevel (quasi-)Monte Carlo experiments for the "
                    "lognormal-coefficient flow benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute the experiment described by a config file")
    run.add_argument("config", type=Path, help="path to a key = value config file")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--epsilon", type=str, default=None,
                     help="override epsilon list (comma separated)")
    run.add_argument("--max-level", type=int, default=None, help="override the level cap")
    run.add_argument("--output-dir", type=Path, default=None,
                     help=f"artifact directory (default: ${OUTPUT_DIR_ENV} or config value)")

    cmp_cmd = sub.add_parser("compare", help="join per-level variance tables across methods")
    cmp_cmd.add_argument("directory", type=Path, help="directory holding run artifacts")

    rates = sub.add_parser("rates", help="refit decay rates from a per-level CSV")
    rates.add_argument("artifact", type=Path, help="path to a *_levels_eps*.csv file")
    return parser


def _cmd_run(args) -> int:
    try:
        config = parse_config(args.config.read_text())
    except (OSError, ConfigError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.epsilon is not None:
        overrides["epsilon_list"] = tuple(float(t) for t in args.epsilon.split(","))
    if args.max_level is not None:
        overrides["max_level"] = args.max_level
    out_dir = args.output_dir or os.environ.get(OUTPUT_DIR_ENV)
    if out_dir is not None:
        overrides["output_dir"] = str(out_dir)
    if overrides:
        config = dataclasses.replace(config, **overrides)
    try:
        paths = run_experiment(config)
    except (SolverDivergenceError, MaxLevelExceededError) as err:
        print(f"estimator failed: {err} (context: {getattr(err, 'context', {})})",
              file=sys.stderr)
        return 1
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return 0


def _cmd_compare(args) -> int:
    try:
        out = compare_methods(args.directory)
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(out)
    return 0


def _cmd_rates(args) -> int:
    try:
        alpha, beta, gamma, label = rates_from_levels_csv(args.artifact)
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"alpha = {alpha:.4g}")
    print(f"beta  = {beta:.4g}")
    print(f"gamma = {gamma:.4g}")
    print(f"regime: {label}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "compare": _cmd_compare, "rates": _cmd_rates}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
