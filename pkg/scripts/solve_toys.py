"""Solve each toy puzzle with its step budget and report when it is first solved."""
import argparse
import time
from pathlib import Path

from mdlarc.harness import export_kl_trace, score_answer, score_puzzle
from mdlarc.solver import SolverConfig, solve_puzzle
from mdlarc.toys import toy_puzzle

BUDGETS = {"identity": (500, 1), "recolor": (1000, 2), "crop": (1500, 2)}


def first_solved(res, truths, k):
    for step in sorted(res.checkpoints):
        att = res.checkpoints[step]
        if all(any(score_answer(a[t], truths[t]) for a in att[:k]) for t in range(len(truths))):
            return step
    return None


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--only", nargs="*", choices=sorted(BUDGETS))
    ap.add_argument("--trace-dir", help="write one KL trace CSV per toy here")
    args = ap.parse_args()
    for name in args.only or BUDGETS:
        steps, k = BUDGETS[name]
        p = toy_puzzle(name)
        t0 = time.perf_counter()
        res = solve_puzzle(p, SolverConfig(steps=steps, seed=args.seed))
        truths = list(p.withheld)
        score = score_puzzle(res.attempts_json(), truths, k)
        print(f"{name}: pass@{k}={score:.2f} after {steps} steps, first solved at "
              f"{first_solved(res, truths, k)}, {time.perf_counter() - t0:.0f} s")
        if args.trace_dir:
            export_kl_trace(res.trace, Path(args.trace_dir) / f"{name}.csv")


if __name__ == "__main__":
    main()
