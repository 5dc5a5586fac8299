"""Train on one puzzle, print the KL of each key at the end, and the leading principal
component of the decoded (example, height) means as a per-row heatmap."""
import argparse

import numpy as np

from mdlarc.harness import pca_top_component
from mdlarc.layers import decoded_means
from mdlarc.multitensor import LEGAL_KEYS, ShapeKey
from mdlarc.puzzle import load_puzzle
from mdlarc.solver import SolverConfig, solve_puzzle
from mdlarc.toys import TOYS, toy_puzzle


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("puzzle", help=f"a puzzle JSON file or one of {sorted(TOYS)}")
    ap.add_argument("--steps", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--key", default="example,height")
    args = ap.parse_args()
    p = toy_puzzle(args.puzzle) if args.puzzle in TOYS else load_puzzle(args.puzzle)
    cfg = SolverConfig(steps=args.steps, seed=args.seed)
    res = solve_puzzle(p, cfg)
    last = res.trace.rows[-1]
    for k, v in sorted(zip(LEGAL_KEYS, last["kl"]), key=lambda kv: -kv[1]):
        print(f"{k.name:36s} {v:10.3f} nats")
    prob = res.problem
    r = pca_top_component(decoded_means(prob.latent, prob.weights, ShapeKey.from_name(args.key)))
    print("ratio of top two singular values:", r.ratio)
    print(np.array2string(np.squeeze(r.heatmap), precision=2))


if __name__ == "__main__":
    main()
