"""Small constructed puzzles whose answers are known by construction."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .puzzle import parse_puzzle


def _task(pairs, test):
    return {
        "train": [{"input": a.tolist(), "output": b.tolist()} for a, b in pairs],
        "test": [{"input": a.tolist(), "output": b.tolist()} for a, b in test],
    }


def identity_task(seed=1, size=4, n_train=3):
    """Output equals input; two colours (black and 1)."""
    rng = np.random.default_rng(seed)
    grids = [rng.integers(0, 2, (size, size)) for _ in range(n_train + 1)]
    return _task([(g, g) for g in grids[:-1]], [(grids[-1], grids[-1])])


def recolor_task(seed=2, size=4, n_train=3, src=1, dst=2):
    """Every ``src`` pixel becomes ``dst``; black stays black."""
    rng = np.random.default_rng(seed)
    grids = [rng.integers(0, 2, (size, size)) * src for _ in range(n_train + 1)]
    swap = lambda g: np.where(g == src, dst, g)
    return _task([(g, swap(g)) for g in grids[:-1]], [(grids[-1], swap(grids[-1]))])


def crop_task(seed=3, shapes=((4, 4), (5, 3), (3, 5)), test_shape=(4, 5), crop=2):
    """Inputs of varying shape; every output is the top-left ``crop`` x ``crop`` corner."""
    rng = np.random.default_rng(seed)
    grids = [rng.integers(0, 3, s) for s in tuple(shapes) + (test_shape,)]
    return _task([(g, g[:crop, :crop]) for g in grids[:-1]], [(grids[-1], grids[-1][:crop, :crop])])


TOYS = {"identity": identity_task, "recolor": recolor_task, "crop": crop_task}


def toy_puzzle(name):
    return parse_puzzle(json.dumps(TOYS[name]()), name)


def write_dataset(root, split="toy", names=tuple(TOYS)):
    """Write the toy tasks as ``<root>/<split>/<name>.json`` (test outputs included)."""
    d = Path(root) / split
    d.mkdir(parents=True, exist_ok=True)
    for n in names:
        (d / f"{n}.json").write_text(json.dumps(TOYS[n]()))
    return d
