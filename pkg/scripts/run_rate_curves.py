#!/usr/bin/env python3
"""Reproduce the rate and outage curves versus the number of D2D pairs.

Runs the sum-rate sweep, the outage sweep, the one-timescale comparison,
and the epsilon sweep, one CSV each under --out. --quick cuts the budget
for a smoke pass.
"""

import argparse
import json
import sys
import tempfile

from coopd2d.cli import main as cli_main

EXPERIMENTS = ("sumrate-vs-n", "outage-vs-n", "one-timescale-compare",
               "epsilon-sweep")

QUICK = {
    "replications": 50,
    "training_samples": 1000,
    "subframes_per_frame": 200,
    "sweep": {"n_values": [5, 15, 25, 40]},
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
