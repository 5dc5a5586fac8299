"""ARC task parsing, output-shape rules, color reduction and canvas masks."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

MAX_SIDE = 30
INPUT, OUTPUT = 0, 1


class PuzzleFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Grid:
    cells: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.cells)
        if a.ndim != 2 or a.size == 0:
            raise PuzzleFormatError("a grid must be a non-empty 2-D array")
        if not (1 <= a.shape[0] <= MAX_SIDE and 1 <= a.shape[1] <= MAX_SIDE):
            raise PuzzleFormatError(f"grid shape {a.shape} outside 1..{MAX_SIDE}")
        if a.min() < 0 or a.max() > 9:
            raise PuzzleFormatError("color code outside 0-9")
        a = a.astype(np.int8)
        a.setflags(write=False)
        object.__setattr__(self, "cells", a)

    @property
    def height(self):
        return self.cells.shape[0]

    @property
    def width(self):
        return self.cells.shape[1]

    @property
    def shape(self):
        return self.cells.shape

    @classmethod
    def from_list(cls, rows):
        if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
            raise PuzzleFormatError("a grid must be a non-empty list of rows")
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise PuzzleFormatError(f"ragged grid: row lengths {sorted(widths)}")
        for r in rows:
            for v in r:
                if isinstance(v, bool) or not isinstance(v, int):
                    raise PuzzleFormatError(f"non-integer cell {v!r}")
        return cls(np.array(rows))

    def to_list(self):
        return self.cells.tolist()

    def key(self):
        """Hashable canonical form."""
        return (self.height, self.width, self.cells.tobytes())

    def __eq__(self, other):
        return isinstance(other, Grid) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())


@dataclass(frozen=True)
class Pair:
    input: Grid
    output: Optional[Grid] = None


@dataclass(frozen=True)
class Puzzle:
    """Demonstration pairs followed by test pairs.

    Test outputs are never placed in ``pairs``.  If the source file carried
    them they sit in ``withheld`` and only the scorer reads them.
    """

    id: str
    pairs: tuple
    n_train: int
    withheld: tuple = field(default=(), compare=False, repr=False)

    @property
    def n_example(self):
        return len(self.pairs)

    @property
    def n_test(self):
        return len(self.pairs) - self.n_train

    @property
    def train(self):
        return self.pairs[: self.n_train]

    @property
    def test(self):
        return self.pairs[self.n_train:]

    def known_grids(self):
        """(example, side, grid) for every grid the solver may see."""
        out = []
        for e, p in enumerate(self.pairs):
            out.append((e, INPUT, p.input))
            if p.output is not None:
                out.append((e, OUTPUT, p.output))
        return out


def _parse_pairs(items, where, need_output):
    if not isinstance(items, list) or not items:
        raise PuzzleFormatError(f"'{where}' must be a non-empty list")
    pairs, outs = [], []
    for item in items:
        if not isinstance(item, dict) or "input" not in item:
            raise PuzzleFormatError(f"each '{where}' entry needs an 'input' grid")
        out = item.get("output")
        if need_output and out is None:
            raise PuzzleFormatError("demonstration pair without an output")
        grid_in = Grid.from_list(item["input"])
        grid_out = Grid.from_list(out) if out is not None else None
        pairs.append(Pair(grid_in, grid_out))
        outs.append(grid_out)
    return pairs, outs


def parse_puzzle(json_text, puzzle_id="puzzle"):
    try:
        blob = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise PuzzleFormatError(f"malformed JSON: {exc}") from exc
    if not isinstance(blob, dict) or "train" not in blob or "test" not in blob:
        raise PuzzleFormatError("task must be an object with 'train' and 'test'")
    train, _ = _parse_pairs(blob["train"], "train", True)
    test, answers = _parse_pairs(blob["test"], "test", False)
    test = [Pair(p.input, None) for p in test]
    withheld = tuple(answers) if any(a is not None for a in answers) else ()
    return Puzzle(puzzle_id, tuple(train + test), len(train), withheld)


def serialize_puzzle(p):
    blob = {
        "train": [{"input": q.input.to_list(), "output": q.output.to_list()} for q in p.train],
        "test": [],
    }
    for i, q in enumerate(p.test):
        item = {"input": q.input.to_list()}
        if p.withheld and p.withheld[i] is not None:
            item["output"] = p.withheld[i].to_list()
        blob["test"].append(item)
    return json.dumps(blob)


def load_puzzle(path):
    path = Path(path)
    return parse_puzzle(path.read_text(), puzzle_id=path.stem)


# ---------------------------------------------------------------- shapes

@dataclass
class ShapeInfo:
    """Shape rules, canvas size, predicted test shapes and prefix masks.

    ``row_masks`` is (n_example, canvas_h, 2) and ``col_masks`` is
    (n_example, canvas_w, 2), last axis indexing input/output.  ``fixed``
    marks grids whose shape is known in advance; the heads place those at
    the origin with certainty.
    """

    rule1: bool
    rule2: bool
    rule3: bool
    canvas_h: int
    canvas_w: int
    shapes: list          # per example: [input (h, w), output (h, w) or None]
    predicted: list       # per example: predicted output shape or None
    row_masks: np.ndarray
    col_masks: np.ndarray
    fixed: np.ndarray     # (n_example, 2) bool

    def grid_masks(self):
        """One mask per example for the layers: union of the input and output masks."""
        from .multitensor import GridMasks

        return GridMasks(self.row_masks.max(axis=2), self.col_masks.max(axis=2))


def infer_shape_rules(p):
    train_in = [q.input.shape for q in p.train]
    train_out = [q.output.shape for q in p.train]
    all_in = [q.input.shape for q in p.pairs]
    rule1 = all(i == o for i, o in zip(train_in, train_out))
    rule2 = len(set(all_in)) == 1
    rule3 = len(set(train_out)) == 1

    shapes, predicted = [], []
    for e, q in enumerate(p.pairs):
        out = q.output.shape if q.output is not None else None
        pred = None
        if e >= p.n_train:
            if rule1:
                pred = q.input.shape
            elif rule3:
                pred = train_out[0]
        shapes.append([q.input.shape, out])
        predicted.append(pred)

    known = [s for pair in shapes for s in pair if s is not None]
    known += [s for s in predicted if s is not None]
    H = max(s[0] for s in known)
    W = max(s[1] for s in known)

    E = p.n_example
    rows = np.zeros((E, H, 2))
    cols = np.zeros((E, W, 2))
    fixed = np.zeros((E, 2), dtype=bool)
    for e in range(E):
        for side in (INPUT, OUTPUT):
            s = shapes[e][side] if side == INPUT or shapes[e][side] is not None else predicted[e]
            if s is None:
                rows[e, :, side] = 1.0
                cols[e, :, side] = 1.0
                continue
            rows[e, : s[0], side] = 1.0
            cols[e, : s[1], side] = 1.0
            # inputs are always given; outputs are pinned only under a shape rule
            fixed[e, side] = side == INPUT or rule1 or rule3
    return ShapeInfo(rule1, rule2, rule3, H, W, shapes, predicted, rows, cols, fixed)


# ---------------------------------------------------------------- colors

@dataclass(frozen=True)
class ColorMap:
    present: tuple

    @property
    def n_colors(self):
        return len(self.present)

    def encode(self, cells):
        """Color codes to class indices: 0 is black, i + 1 is ``present[i]``."""
        lut = np.zeros(10, dtype=np.int64)
        for i, c in enumerate(self.present):
            lut[c] = i + 1
        return lut[np.asarray(cells)]

    def decode(self, idx):
        lut = np.array((0,) + tuple(self.present), dtype=np.int64)
        return lut[np.asarray(idx)]


def build_color_map(p):
    colors = set()
    for _, _, g in p.known_grids():
        colors.update(int(v) for v in np.unique(g.cells))
    colors.discard(0)
    return ColorMap(tuple(sorted(colors)))
