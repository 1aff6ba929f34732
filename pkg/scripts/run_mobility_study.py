#!/usr/bin/env python3
"""Reproduce the mobility study: hold a frame's matching and policies
fixed while nodes move, and track the weighted D2D sum rate per half
second over a two second window at several speeds.

Writes mobility.csv under --out. --quick cuts the budget.
"""

import argparse
import json
import sys
import tempfile

from coopd2d.cli import main as cli_main

QUICK = {
    "replications": 50,
    "training_samples": 1000,
}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results", help="output directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--speeds", type=float, nargs="+",
                    default=[5.0, 10.0, 20.0], metavar="M_PER_S")
    ap.add_argument("--quick", action="store_true",
                    help="reduced Monte Carlo budget")
    args = ap.parse_args()

    cfg = {"experiment": "mobility", "output_dir": args.out,
           "sweep": {"speeds": args.speeds}}
    if args.quick:
        cfg.update(QUICK)
    with tempfile.NamedTemporaryFile("w", suffix=".json") as fh:
        json.dump(cfg, fh)
        fh.flush()
        return cli_main(["--config", fh.name, "--seed", str(args.seed),
                         "--threads", str(args.threads)])


if __name__ == "__main__":
    sys.exit(main())
