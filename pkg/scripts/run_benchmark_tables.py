#!/usr/bin/env python3
"""Reproduce the table-style benchmarks.

Runs the stability-gap statistics, the average-utility table, and the
iteration-count grid, writing one CSV each under --out. Full scale uses
the built-in defaults (15 CUs, 1000 replications, 10k training draws);
--quick cuts the budget for a minutes-long smoke pass.
"""

import argparse
import json
import sys
import tempfile

from coopd2d.cli import main as cli_main

EXPERIMENTS = ("gap-stats", "avg-utility", "iterations-vs-epsilon")

QUICK = {
    "replications": 50,
    "training_samples": 1000,
    "subframes_per_frame": 200,
}


def launch(experiment: str, args: argparse.Namespace) -> int:
    cfg = {"experiment": experiment, "output_dir": args.out}
    if args.quick:
        cfg.update(QUICK)
    with tempfile.NamedTemporaryFile("w", suffix=".json") as fh:
        json.dump(cfg, fh)
        fh.flush()
        return cli_main(["--config", fh.name, "--seed", str(args.seed),
                         "--threads", str(args.threads)])


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results", help="output directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--quick", action="store_true",
                    help="reduced Monte Carlo budget")
    args = ap.parse_args()
    for experiment in EXPERIMENTS:
        print(f"== {experiment} ==", flush=True)
        rc = launch(experiment, args)
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(main())
