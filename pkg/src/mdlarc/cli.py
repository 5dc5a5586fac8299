"""Command line: solve a dataset split, score a submission, check seed-length bounds."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness, rec
from .solver import SolverConfig


def _solve(args):
    cfg = SolverConfig.from_file(args.config) if args.config else SolverConfig()
    overrides = {"steps": args.steps, "seed": args.seed}
    if args.float32:
        overrides["dtype"] = "float32"
    cfg = SolverConfig.from_mapping({**cfg.to_dict(), **{k: v for k, v in overrides.items() if v is not None}})
    out = Path(args.out) if args.out else harness.default_out_root() / args.split
    m = harness.RunManifest(args.dataset, args.split, out, tuple(args.puzzle or ()), cfg, args.parallel, args.trace)
    table = harness.run_dataset(m)
    print(json.dumps(table.to_dict()["pass_at"], indent=1))
    print(f"results in {out}", file=sys.stderr)
    return 1 if table.failures else 0


def _score(args):
    table = harness.score_submission(args.attempts, args.truth)
    print(json.dumps(table.to_dict(), indent=1))
    return 0


def _rec_verify(args):
    dp = rec.DistPair(rec.Gaussian(args.mu, args.sigma), rec.Gaussian(), args.c)
    report, seeds = rec.verify_seed_bound(dp, args.trials, np.random.default_rng(args.seed))
    print(json.dumps(report.to_dict(), indent=1, default=float))
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["trial", "seed_index"])
            w.writerows(enumerate(seeds.tolist(), start=1))
    return 0 if report.to_dict()["pass"] else 1


def build_parser():
    ap = argparse.ArgumentParser(prog="mdlarc", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("solve", help="train on every puzzle of a split and score it")
    s.add_argument("--dataset", required=True, help="directory holding <split>/<id>.json")
    s.add_argument("--split", required=True)
    s.add_argument("--puzzle", action="append", help="restrict to this puzzle id (repeatable)")
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help=f"output directory (default ${harness.OUT_ENV}/<split> or runs/<split>)")
    s.add_argument("--trace", action="store_true", help="write per-step KL traces as CSV")
    s.add_argument("--parallel", type=int, default=1)
    s.add_argument("--config", help="solver settings as JSON or key=value lines")
    s.add_argument("--float32", action="store_true")
    s.set_defaults(fn=_solve)

    s = sub.add_parser("score", help="score a submission file against puzzle files with outputs")
    s.add_argument("--attempts", required=True)
    s.add_argument("--truth", required=True)
    s.set_defaults(fn=_score)

    s = sub.add_parser("rec-verify", help="rejection-sample N(mu, sigma^2) from N(0, 1) proposals")
    s.add_argument("--mu", type=float, default=0.0)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--c", type=float, default=0.1)
    s.add_argument("--trials", type=int, default=10000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--csv", help="write (trial, seed_index) rows here")
    s.set_defaults(fn=_rec_verify)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
