"""Command line front end: one flat command, flags only.

Exit codes: 0 success, 1 bad configuration or I/O trouble, 2 a runtime
invariant tripped (results would not be trustworthy).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import ConfigError, parse_config
from .experiments import (EXPERIMENT_NAMES, ExperimentSpec, run_experiment)
from .matching import InvariantViolation
from .sim import ScenarioConfig


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coopd2d",
        description="Run cooperative D2D resource-sharing experiments "
                    "and write CSV tables.")
    parser.add_argument("--config", metavar="PATH",
                        help="JSON config file ({} gives the defaults)")
    parser.add_argument("--experiment", metavar="NAME",
                        choices=EXPERIMENT_NAMES,
                        help="experiment to run: " +
                             ", ".join(EXPERIMENT_NAMES))
    parser.add_argument("--seed", metavar="U64", type=int,
                        help="master seed override")
    parser.add_argument("--replications", metavar="K", type=int,
                        help="Monte Carlo replications override")
    parser.add_argument("--out", metavar="DIR",
                        help="output directory override")
    parser.add_argument("--threads", metavar="COUNT", type=int, default=1,
                        help="worker processes (default 1)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg, spec = parse_config(args.config)
        else:
            cfg, spec = ScenarioConfig(), ExperimentSpec()
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        try:
            if args.experiment is not None:
                spec = replace(spec, name=args.experiment)
            if args.seed is not None:
                if args.seed < 0:
                    raise ConfigError("--seed must be nonnegative")
                cfg = replace(cfg, seed=args.seed)
                spec = replace(spec, seed=args.seed)
            if args.replications is not None:
                spec = replace(spec, replications=args.replications)
            if args.out is not None:
                spec = replace(spec, output_dir=args.out)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        _, summary = run_experiment(spec, cfg, threads=args.threads)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
