"""Multitensors: one dense array per legal subset of the puzzle dimensions.

Every entry is stored at full rank in the canonical axis order
(example, color, direction, height, width, channel); a dimension the key does
not include has length 1.  Broadcasting between keys is then plain numpy
broadcasting, and the (height, width) swap of a diagonal reflection is a plain
axis swap that lands the height-only tensor on the width-only key.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad

DIM_NAMES = ("example", "color", "direction", "height", "width")
EXAMPLE, COLOR, DIRECTION, HEIGHT, WIDTH, CHANNEL = range(6)
N_DIRECTIONS = 8

# Compass directions counter-clockwise from east, as (row step, column step).
# Row 0 is the top of the grid, so north is a negative row step.
DIRECTION_NAMES = ("E", "NE", "N", "NW", "W", "SW", "S", "SE")
DIRECTION_STEPS = ((0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class ShapeKey:
    example: bool
    color: bool
    direction: bool
    height: bool
    width: bool

    @property
    def flags(self):
        return (self.example, self.color, self.direction, self.height, self.width)

    @property
    def axes(self):
        """Indices of the present non-channel axes."""
        return tuple(i for i, f in enumerate(self.flags) if f)

    @property
    def residual_width(self):
        return 8 if self.direction else 16

    @property
    def name(self):
        return ",".join(n for n, f in zip(DIM_NAMES, self.flags) if f)

    def is_legal(self):
        if not (self.color or self.direction or self.height or self.width):
            return False
        if (self.height or self.width) and not self.example:
            return False
        return True

    def issubset(self, other):
        return all(o or not s for s, o in zip(self.flags, other.flags))

    def transposed(self):
        return ShapeKey(self.example, self.color, self.direction, self.width, self.height)

    def shape(self, dims, channels):
        return tuple(n if f else 1 for n, f in zip(dims, self.flags)) + (channels,)

    @classmethod
    def from_name(cls, name):
        parts = set(filter(None, name.split(",")))
        unknown = parts - set(DIM_NAMES)
        if unknown:
            raise ValueError(f"unknown dimension names {sorted(unknown)}")
        return cls(*(n in parts for n in DIM_NAMES))

    def __repr__(self):
        return f"ShapeKey({self.name})"


def all_shape_keys():
    return [ShapeKey(*flags) for flags in itertools.product((False, True), repeat=5)]


def enumerate_legal_shapes():
    """The legal keys in canonical order (rank, then lexicographic on flags)."""
    keys = [k for k in all_shape_keys() if k.is_legal()]
    return sorted(keys, key=lambda k: (len(k.axes), tuple(not f for f in k.flags)))


LEGAL_KEYS = tuple(enumerate_legal_shapes())


def tied_key(key):
    """The key whose per-tensor weights this key shares.

    Height-only keys borrow the weights of their width-only twin so the
    network stays equivariant under transposition.
    """
    if key.height and not key.width:
        return key.transposed()
    return key


@dataclass(frozen=True)
class Dims:
    n_example: int
    n_colors: int
    height: int
    width: int
    n_directions: int = N_DIRECTIONS

    def as_tuple(self):
        return (self.n_example, self.n_colors, self.n_directions, self.height, self.width)

    def transposed(self):
        return Dims(self.n_example, self.n_colors, self.width, self.height, self.n_directions)


class MultiTensor:
    """Mapping from legal ShapeKey to an array or autodiff Tensor."""

    def __init__(self, entries, dims):
        self.entries = dict(entries)
        self.dims = dims

    def __getitem__(self, key):
        return self.entries[key]

    def __iter__(self):
        return iter(k for k in LEGAL_KEYS if k in self.entries)

    def __len__(self):
        return len(self.entries)

    def keys(self):
        return list(iter(self))

    def items(self):
        return [(k, self.entries[k]) for k in self]

    def map(self, fn):
        return MultiTensor({k: fn(k, v) for k, v in self.items()}, self.dims)

    def zip(self, other, fn):
        if set(self.entries) != set(other.entries):
            raise ValueError("multitensors hold different key sets")
        out = {}
        for k, v in self.items():
            w = other.entries[k]
            if _shape(v) != _shape(w):
                raise ValueError(f"shape mismatch at {k.name}: {_shape(v)} vs {_shape(w)}")
            out[k] = fn(k, v, w)
        return MultiTensor(out, self.dims)

    def numpy(self):
        return self.map(lambda k, v: np.asarray(v.data if isinstance(v, ad.Tensor) else v))

    def squeezed(self, key):
        """The entry with absent dimensions dropped."""
        arr = self.numpy()[key]
        drop = tuple(i for i in range(5) if not key.flags[i])
        return arr.reshape(tuple(s for i, s in enumerate(arr.shape) if i not in drop))

    def check(self):
        if set(self.entries) != set(LEGAL_KEYS):
            raise ValueError("a multitensor must hold exactly the legal keys")
        full = self.dims.as_tuple()
        for k, v in self.items():
            s = _shape(v)
            if s[:5] != k.shape(full, 1)[:5]:
                raise ValueError(f"entry {k.name} has shape {s}, expected {k.shape(full, s[-1])}")
        return self

    def dump(self):
        """JSON-serialisable description: dims plus (key, shape, row-major values)."""
        arrs = self.numpy()
        return {
            "dims": dict(zip(("n_example", "n_colors", "n_directions", "height", "width"), self.dims.as_tuple())),
            "entries": [
                {"key": k.name, "shape": list(a.shape), "values": a.ravel().tolist()}
                for k, a in arrs.items()
            ],
        }

    def dumps(self):
        return json.dumps(self.dump())

    @classmethod
    def load(cls, blob):
        if isinstance(blob, str):
            blob = json.loads(blob)
        d = blob["dims"]
        dims = Dims(d["n_example"], d["n_colors"], d["height"], d["width"], d["n_directions"])
        entries = {
            ShapeKey.from_name(e["key"]): np.asarray(e["values"], dtype=float).reshape(e["shape"])
            for e in blob["entries"]
        }
        return cls(entries, dims)


def _shape(v):
    return tuple(v.shape)


def zeros_like(x):
    return x.map(lambda k, v: np.zeros(_shape(v)))


def random_multitensor(dims, rng, channels=None):
    channels = channels or (lambda k: k.residual_width)
    full = dims.as_tuple()
    return MultiTensor({k: rng.standard_normal(k.shape(full, channels(k))) for k in LEGAL_KEYS}, dims)


# ---------------------------------------------------------------- symmetries

def _perm_inverse(p):
    inv = np.empty_like(p)
    inv[p] = np.arange(len(p))
    return inv


_FLIP_W = np.array([(4 - d) % 8 for d in range(8)])
_FLIP_H = np.array([(-d) % 8 for d in range(8)])
_TRANSPOSE = np.array([(6 - d) % 8 for d in range(8)])


def d4_direction_perm(d4):
    """Where each compass direction goes under element d4 = rotation + 4 * flip."""
    k, flip = d4 % 4, d4 // 4
    perm = np.arange(8)
    if flip:
        perm = _FLIP_W[perm]
    for _ in range(k):
        perm = _FLIP_H[_TRANSPOSE[perm]]
    return perm


_PERM_TO_D4 = {tuple(d4_direction_perm(g)): g for g in range(8)}


def d4_compose(first, then):
    """The element equal to applying ``first`` and then ``then``."""
    return _PERM_TO_D4[tuple(d4_direction_perm(then)[d4_direction_perm(first)])]


def d4_inverse(g):
    return _PERM_TO_D4[tuple(_perm_inverse(d4_direction_perm(g)))]


def d4_swaps_axes(g):
    return (g % 4) % 2 == 1


@dataclass(frozen=True)
class SymmetryElement:
    """Example permutation, color permutation and square symmetry.

    Permutations act by gathering: entry ``i`` of the result is entry
    ``perm[i]`` of the argument.  ``d4`` counts counter-clockwise quarter
    turns, plus 4 when a left-right mirror is applied first.
    """

    example_perm: tuple
    color_perm: tuple
    d4: int = 0

    @classmethod
    def identity(cls, n_example, n_colors):
        return cls(tuple(range(n_example)), tuple(range(n_colors)), 0)

    @classmethod
    def random(cls, n_example, n_colors, rng, d4=None):
        return cls(
            tuple(int(i) for i in rng.permutation(n_example)),
            tuple(int(i) for i in rng.permutation(n_colors)),
            int(rng.integers(8)) if d4 is None else d4,
        )

    def inverse(self):
        return SymmetryElement(
            tuple(int(i) for i in _perm_inverse(np.array(self.example_perm, dtype=int))),
            tuple(int(i) for i in _perm_inverse(np.array(self.color_perm, dtype=int))),
            d4_inverse(self.d4),
        )

    def then(self, other):
        """Apply self, then other."""
        return SymmetryElement(
            tuple(self.example_perm[i] for i in other.example_perm),
            tuple(self.color_perm[i] for i in other.color_perm),
            d4_compose(self.d4, other.d4),
        )


def _spatial_array(a, d4, has_direction):
    """Apply a square symmetry to a full-rank array (direction axis 2, grid axes 3-4)."""
    k, flip = d4 % 4, d4 // 4
    if flip:
        a = a[:, :, :, :, ::-1]
    for _ in range(k):
        a = np.swapaxes(a, 3, 4)[:, :, :, ::-1]
    if has_direction:
        a = a[:, :, _perm_inverse(d4_direction_perm(d4))]
    return a


def apply_symmetry(x, g):
    """Transform every entry of a multitensor by g; returns numpy entries."""
    x = x.numpy()
    ep = np.array(g.example_perm, dtype=int)
    cp = np.array(g.color_perm, dtype=int)
    out = {}
    for key, a in x.items():
        if key.example:
            a = a[ep]
        if key.color:
            a = a[:, cp]
        a = _spatial_array(a, g.d4, key.direction)
        new_key = key.transposed() if d4_swaps_axes(g.d4) else key
        out[new_key] = np.ascontiguousarray(a)
    dims = x.dims.transposed() if d4_swaps_axes(g.d4) else x.dims
    return MultiTensor(out, dims)


@dataclass
class GridMasks:
    """Row and column validity per example on the canvas, shapes (E, H) and (E, W)."""

    rows: np.ndarray
    cols: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def full(self, key):
        """Mask broadcastable against a full-rank entry of ``key``."""
        ck = ("full", key.height, key.width)
        if ck not in self._cache:
            E, H = self.rows.shape
            W = self.cols.shape[1]
            m = np.ones((E, 1, 1, H if key.height else 1, W if key.width else 1, 1))
            if key.height:
                m = m * self.rows[:, None, None, :, None, None]
            if key.width:
                m = m * self.cols[:, None, None, None, :, None]
            self._cache[ck] = m
        return self._cache[ck]

    def transform(self, g):
        ep = np.array(g.example_perm, dtype=int)
        rows, cols = self.rows[ep], self.cols[ep]
        k, flip = g.d4 % 4, g.d4 // 4
        if flip:
            cols = cols[:, ::-1]
        for _ in range(k):
            rows, cols = cols[:, ::-1], rows
        return GridMasks(np.ascontiguousarray(rows), np.ascontiguousarray(cols))
