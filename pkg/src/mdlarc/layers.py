"""The equivariant network: latent decoding, the core block layers and the heads.

All layers read from and write to a residual multitensor through per-key
channel projections.  Height-only keys use the weights of their width-only
twins (``tied_key``) so the whole network commutes with transposition,
except the softmax layer, whose channel layout depends on which axes are
softmaxed together.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .multitensor import (
    DIRECTION_STEPS,
    LEGAL_KEYS,
    Dims,
    MultiTensor,
    ShapeKey,
    d4_direction_perm,
    tied_key,
)
from .puzzle import INPUT, OUTPUT

NON_CHANNEL = (0, 1, 2, 3, 4)
BLOCK_LAYERS = ("communicate", "softmax", "shift", "cummax", "direction_communicate", "nonlinear", "normalize")
DIRECTIONAL_KEYS = (ShapeKey(True, True, True, True, True), ShapeKey(True, False, True, True, True))
COLOR_KEY = ShapeKey(True, True, False, True, True)
ROW_KEY = ShapeKey(True, False, False, True, False)
COL_KEY = ShapeKey(True, False, False, False, True)
PINNED = 1e6      # row/column score magnitude that pins a slice with certainty
MASKED_LOW = 1e6  # stands in for -inf at masked pixels in the cummax
TIED_NAME = {k: tied_key(k).name for k in LEGAL_KEYS}
UP_SOURCES = {t: [s for s in LEGAL_KEYS if s != t and s.issubset(t)] for t in LEGAL_KEYS}
DOWN_SOURCES = {t: [s for s in LEGAL_KEYS if s != t and t.issubset(s)] for t in LEGAL_KEYS}


@dataclass(frozen=True)
class ArchConfig:
    n_blocks: int = 4
    block_order: tuple = BLOCK_LAYERS
    latent_channels: int = 4
    up_width: int = 16
    down_width: int = 8
    softmax_width: int = 2
    directional_width: int = 4
    dircomm_width: int = 2
    nonlinear_width: int = 16
    init_capacity: float = 1e4
    min_capacity: float = 0.5
    capacity_scale: float = 10.0
    mean_init_std: float = 1e-2
    color_bias_scale: float = 100.0
    eps: float = 1e-8


# ---------------------------------------------------------------- parameters

class NetworkWeights:
    """Named projection weights; tied keys resolve to one stored tensor."""

    def __init__(self, cfg, rng, dtype=np.float64):
        self.cfg = cfg
        self.dtype = dtype
        self.params = {}
        self._build(rng)

    def _linear(self, name, n_in, n_out, rng, same_columns=False):
        if name + ".w" in self.params:
            return
        std = np.sqrt(2.0 / (n_in + n_out))
        if same_columns:
            col = rng.standard_normal((n_in, 1)) * std
            w = np.repeat(col, n_out, axis=1)
        else:
            w = rng.standard_normal((n_in, n_out)) * std
        self.params[name + ".w"] = ad.param(w, name + ".w", self.dtype)
        self.params[name + ".b"] = ad.param(np.zeros(n_out), name + ".b", self.dtype)

    def linear(self, name, key=None):
        if key is not None:
            name = f"{name}.{TIED_NAME[key]}"
        return self.params[name + ".w"], self.params[name + ".b"]

    def _build(self, rng):
        c = self.cfg
        for k in LEGAL_KEYS:
            self._linear(f"decode.{tied_key(k).name}", c.latent_channels, k.residual_width, rng)
        for b in range(c.n_blocks):
            for layer in c.block_order:
                for k in LEGAL_KEYS:
                    t = tied_key(k).name
                    r = k.residual_width
                    pre = f"b{b}.{layer}"
                    if layer == "communicate":
                        self._linear(f"{pre}.up.{t}", r, c.up_width, rng)
                        self._linear(f"{pre}.down.{t}", r, c.down_width, rng)
                        self._linear(f"{pre}.write.{t}", c.up_width + c.down_width, r, rng)
                    elif layer == "softmax":
                        n_sub = len(softmax_subsets(k))
                        self._linear(f"{pre}.read.{t}", r, c.softmax_width, rng)
                        self._linear(f"{pre}.write.{t}", c.softmax_width * n_sub, r, rng)
                    elif layer in ("shift", "cummax") and k in DIRECTIONAL_KEYS:
                        self._linear(f"{pre}.read.{t}", r, c.directional_width, rng)
                        self._linear(f"{pre}.write.{t}", c.directional_width, r, rng)
                    elif layer == "direction_communicate" and k.direction:
                        self._linear(f"{pre}.read.{t}", r, c.dircomm_width, rng)
                        self._linear(f"{pre}.write.{t}", c.dircomm_width, r, rng)
                        name = f"{pre}.maps.{t}"
                        if name not in self.params:
                            n, w = c.dircomm_width, N_ANGLE_ORBITS
                            maps = rng.standard_normal((w, n, n)) * np.sqrt(2.0 / (2 * n))
                            self.params[name] = ad.param(maps, name, self.dtype)
                    elif layer == "nonlinear":
                        self._linear(f"{pre}.read.{t}", r, c.nonlinear_width, rng)
                        self._linear(f"{pre}.write.{t}", c.nonlinear_width, r, rng)
        self._linear("head.color", COLOR_KEY.residual_width, 2, rng, same_columns=True)
        self._linear(f"head.shape.{tied_key(ROW_KEY).name}", ROW_KEY.residual_width, 2, rng)

    def count(self):
        return int(sum(p.data.size for p in self.params.values()))

    def zero_writes(self):
        for name, p in self.params.items():
            if ".write." in name:
                p.data = np.zeros_like(p.data)


class LatentParams:
    """Per-key latent means, per-element capacity adjustments and target capacity."""

    def __init__(self, dims, cfg, rng, dtype=np.float64):
        self.dims = dims
        self.cfg = cfg
        full = dims.as_tuple()
        raw = np.log(cfg.init_capacity - cfg.min_capacity) / cfg.capacity_scale
        self.params = {}
        for k in LEGAL_KEYS:
            shape = k.shape(full, cfg.latent_channels)
            self.params[f"latent.{k.name}.mean"] = ad.param(
                rng.standard_normal(shape) * cfg.mean_init_std, dtype=dtype)
            self.params[f"latent.{k.name}.adjust"] = ad.param(np.zeros(shape), dtype=dtype)
            self.params[f"latent.{k.name}.capacity"] = ad.param(raw, dtype=dtype)

    def mean(self, k):
        return self.params[f"latent.{k.name}.mean"]

    def adjust(self, k):
        return self.params[f"latent.{k.name}.adjust"]

    def raw_capacity(self, k):
        return self.params[f"latent.{k.name}.capacity"]

    def target_capacity(self, k):
        c = self.cfg
        return ad.affine_scale(ad.exp(ad.affine_scale(self.raw_capacity(k), c.capacity_scale)), 1.0, c.min_capacity)


# ---------------------------------------------------------------- decoding

def noise_variance(capacity):
    """Per-element noise variance giving a unit-power AWGN channel this capacity (nats)."""
    return 1.0 / np.expm1(2.0 * np.asarray(capacity, dtype=float))


def snr_gate(log_mean_snr):
    return 1.0 / (1.0 + np.exp(-np.asarray(log_mean_snr, dtype=float)))


def decode_latent(latent, weights, rng, return_stats=False):
    """Sample z for every key, returning (z, kl_per_key).

    Per element i with capacity c_i, the normalized mean m_i passes through a
    unit-power Gaussian channel: z_i = m_i sqrt(1 - e^{-2 c_i}) + e^{-c_i} noise,
    so z_i has unit variance over the key and the channel carries c_i nats.
    The KL of N(m_i sqrt(1 - e^{-2c_i}), e^{-2c_i}) to N(0, 1) is
    c_i + (m_i^2 - 1)(1 - e^{-2c_i}) / 2.
    """
    cfg = latent.cfg
    z, kl, stats = {}, {}, {}
    for k in LEGAL_KEYS:
        mean = latent.mean(k)
        n = mean.data.size
        if n == 0:
            kl[k] = ad.const(np.zeros(()))
            w, b = weights.linear("decode", k)
            z[k] = ad.linear_project(ad.const(np.zeros(mean.shape)), w, b)
            continue
        m = ad.normalize(mean, NON_CHANNEL, cfg.eps)
        share = ad.softmax(latent.adjust(k), tuple(range(mean.ndim)))
        cap = ad.mul(share, latent.target_capacity(k))
        signal_power = ad.affine_scale(ad.expm1(ad.affine_scale(cap, -2.0)), -1.0)
        signal = ad.sqrt(signal_power)
        noise = ad.exp(ad.affine_scale(cap, -1.0))
        eps = rng.standard_normal(mean.shape)
        sample = ad.add(ad.mul(m, signal), ad.mul(noise, eps))
        kl_el = ad.add(cap, ad.mul(ad.affine_scale(ad.square(m), 0.5, -0.5), signal_power))
        kl[k] = ad.sum_reduce(kl_el)
        log_snr = ad.log_expm1(ad.affine_scale(cap, 2.0))
        log_mean_snr = ad.affine_scale(ad.logsumexp(log_snr), 1.0, -np.log(n))
        gate = ad.sigmoid(log_mean_snr)
        w, b = weights.linear("decode", k)
        z[k] = ad.linear_project(ad.mul(sample, gate), w, b)
        if return_stats:
            stats[k] = {"gate": float(gate.data), "capacity": float(np.sum(cap.data))}
    zt = MultiTensor(z, latent.dims)
    return (zt, kl, stats) if return_stats else (zt, kl)


def decoded_means(latent, weights, k):
    """Noise-free decoding-layer output of one key as a numpy array."""
    cfg = latent.cfg
    mean = latent.mean(k).data
    mu = mean.mean(axis=NON_CHANNEL, keepdims=True)
    m = (mean - mu) / np.sqrt(((mean - mu) ** 2).mean(axis=NON_CHANNEL, keepdims=True) + cfg.eps)
    adjust = latent.adjust(k).data
    share = np.exp(adjust - adjust.max())
    share /= share.sum()
    cap = share * (cfg.min_capacity + np.exp(cfg.capacity_scale * float(latent.raw_capacity(k).data)))
    log_snr = ad._log_expm1(2.0 * cap)
    gate = snr_gate(float(np.log(np.mean(np.exp(log_snr - log_snr.max())))) + log_snr.max())
    w, b = weights.linear("decode", k)
    return (m * np.sqrt(-np.expm1(-2.0 * cap)) * gate) @ w.data + b.data


# ---------------------------------------------------------------- layer helpers

def _prenorm_read(x, w, b, eps):
    return ad.linear_project(ad.normalize(x, NON_CHANNEL, eps), w, b)


def softmax_subsets(key):
    """Axis sets to softmax over; the example axis is always included when present."""
    others = [a for a in key.axes if a != 0]
    subsets = []
    for bits in range(1 << len(others)):
        chosen = tuple(a for i, a in enumerate(others) if bits >> i & 1)
        if key.example:
            subsets.append((0,) + chosen)
        elif chosen:
            subsets.append(chosen)
    return subsets


def _angle_orbits():
    """Orbit index of every (source, target) direction pair under the square symmetries."""
    perms = [d4_direction_perm(g) for g in range(8)]
    orbit = -np.ones((8, 8), dtype=int)
    n = 0
    for s, t in itertools.product(range(8), range(8)):
        if orbit[s, t] >= 0:
            continue
        for p in perms:
            orbit[p[s], p[t]] = n
        n += 1
    return orbit, n


ANGLE_ORBIT, N_ANGLE_ORBITS = _angle_orbits()


def angle_coefficient(delta):
    """Message scale for a direction difference of ``delta`` eighths of a turn."""
    a = min(delta % 8, (-delta) % 8)
    return {0: 1.0, 1: 0.2, 2: 0.4, 3: 0.2, 4: 1.0}[a]


ANGLE_COEF = np.array([[angle_coefficient(t - s) for t in range(8)] for s in range(8)])


def _down_weights(src, dst, dims, masks):
    """Constant weights turning sum over the removed axes into a (masked) mean."""
    cache = masks._cache
    ck = ("down", src, dst)
    if ck in cache:
        return cache[ck]
    E, C, D, H, W = dims.as_tuple()
    removed = [a for a in src.axes if a not in dst.axes]
    w = np.ones((1,) * 6)
    if 0 in removed:
        w = w / max(E, 1)
    if 1 in removed:
        w = w / max(C, 1)
    if 2 in removed:
        w = w / D
    if 3 in removed:
        r = masks.rows[:, None, None, :, None, None]
        w = w * r / r.sum(axis=3, keepdims=True)
    if 4 in removed:
        c = masks.cols[:, None, None, None, :, None]
        w = w * c / c.sum(axis=4, keepdims=True)
    cache[ck] = (w, tuple(removed))
    return cache[ck]


# ---------------------------------------------------------------- block layers

def communicate(x, weights, masks, prefix, cfg):
    up, down = {}, {}
    for k in LEGAL_KEYS:
        up[k] = ad.linear_project(x[k], *weights.linear(f"{prefix}.up", k))
        down[k] = ad.linear_project(x[k], *weights.linear(f"{prefix}.down", k))
    full = x.dims.as_tuple()
    out = {}
    for t in LEGAL_KEYS:
        shape_up = t.shape(full, cfg.up_width)
        shape_down = t.shape(full, cfg.down_width)
        acc_up = None
        acc_down = None
        for s in UP_SOURCES[t]:
            acc_up = up[s] if acc_up is None else ad.add(acc_up, up[s])
        for s in DOWN_SOURCES[t]:
            w, removed = _down_weights(s, t, x.dims, masks)
            msg = ad.weighted_sum(down[s], w, removed)
            acc_down = msg if acc_down is None else ad.add(acc_down, msg)
        acc_up = ad.const(np.zeros(shape_up)) if acc_up is None else ad.broadcast_to(acc_up, shape_up)
        acc_down = ad.const(np.zeros(shape_down)) if acc_down is None else ad.broadcast_to(acc_down, shape_down)
        msg = ad.concat([ad.normalize(acc_up, NON_CHANNEL, cfg.eps), ad.normalize(acc_down, NON_CHANNEL, cfg.eps)])
        out[t] = ad.add(x[t], ad.linear_project(msg, *weights.linear(f"{prefix}.write", t)))
    return MultiTensor(out, x.dims)


def softmax_layer(x, weights, masks, prefix, cfg):
    out = {}
    for k in LEGAL_KEYS:
        h = _prenorm_read(x[k], *weights.linear(f"{prefix}.read", k), cfg.eps)
        parts = [ad.softmax(h, axes) for axes in softmax_subsets(k)]
        y = ad.concat(parts) if len(parts) > 1 else parts[0]
        out[k] = ad.add(x[k], ad.linear_project(y, *weights.linear(f"{prefix}.write", k)))
    return MultiTensor(out, x.dims)


def _minmax_rescale(h, m, eps):
    hi = ad.max_reduce(ad.add(ad.mul(h, m), (m - 1.0) * MASKED_LOW), (3, 4))
    lo = ad.affine_scale(ad.max_reduce(ad.add(ad.mul(h, -m), (m - 1.0) * MASKED_LOW), (3, 4)), -1.0)
    span = ad.affine_scale(ad.sub(hi, lo), 1.0, eps)
    return ad.affine_scale(ad.div(ad.sub(h, lo), span), 2.0, -1.0)


def directional_layer(x, weights, masks, prefix, cfg, kind):
    out = dict(x.entries)
    for k in DIRECTIONAL_KEYS:
        m = masks.full(k)
        h = _prenorm_read(x[k], *weights.linear(f"{prefix}.read", k), cfg.eps)
        if kind == "cummax":
            h = _minmax_rescale(h, m, cfg.eps)
            h = ad.add(ad.mul(h, m), (m - 1.0) * MASKED_LOW)
            y = ad.directional_cummax(h, DIRECTION_STEPS)
        else:
            y = ad.directional_shift(ad.mul(h, m), DIRECTION_STEPS)
        y = ad.mul(y, m)
        out[k] = ad.add(x[k], ad.linear_project(y, *weights.linear(f"{prefix}.write", k)))
    return MultiTensor(out, x.dims)


def direction_maps(maps):
    """Full (source, target, in, out) map stack from the orbit-tied parameters."""
    return ad.mul(ad.take(maps, ANGLE_ORBIT), ANGLE_COEF[:, :, None, None])


def direction_communicate(x, weights, masks, prefix, cfg):
    out = dict(x.entries)
    for k in LEGAL_KEYS:
        if not k.direction:
            continue
        h = _prenorm_read(x[k], *weights.linear(f"{prefix}.read", k), cfg.eps)
        maps = direction_maps(weights.params[f"{prefix}.maps.{tied_key(k).name}"])
        y = ad.einsum("abshwi,stio->abthwo", h, maps)
        if k.height or k.width:
            y = ad.mul(y, masks.full(k))
        out[k] = ad.add(x[k], ad.linear_project(y, *weights.linear(f"{prefix}.write", k)))
    return MultiTensor(out, x.dims)


def nonlinear(x, weights, masks, prefix, cfg):
    out = {}
    for k in LEGAL_KEYS:
        h = ad.silu(_prenorm_read(x[k], *weights.linear(f"{prefix}.read", k), cfg.eps))
        out[k] = ad.add(x[k], ad.linear_project(h, *weights.linear(f"{prefix}.write", k)))
    return MultiTensor(out, x.dims)


def normalize_layer(x, weights=None, masks=None, prefix=None, cfg=ArchConfig()):
    return x.map(lambda k, v: ad.normalize(v, NON_CHANNEL, cfg.eps))


LAYER_FUNCS = {
    "communicate": communicate,
    "softmax": softmax_layer,
    "shift": lambda x, w, m, p, c: directional_layer(x, w, m, p, c, "shift"),
    "cummax": lambda x, w, m, p, c: directional_layer(x, w, m, p, c, "cummax"),
    "direction_communicate": direction_communicate,
    "nonlinear": nonlinear,
    "normalize": normalize_layer,
}


def forward_network(weights, z, masks, skip=()):
    """Run the residual blocks on z.  ``skip`` names block layers to leave out."""
    cfg = weights.cfg
    x = z.map(lambda k, v: ad.const(v) if not isinstance(v, ad.Tensor) else v)
    for b in range(cfg.n_blocks):
        for layer in cfg.block_order:
            if layer in skip:
                continue
            x = LAYER_FUNCS[layer](x, weights, masks, f"b{b}.{layer}", cfg)
    return x


# ---------------------------------------------------------------- heads

@dataclass
class HeadOutput:
    color_logits: ad.Tensor   # (E, n_colors + 1, H, W, 2); class 0 is black
    row_scores: ad.Tensor     # (E, H, 2)
    col_scores: ad.Tensor     # (E, W, 2)
    fixed: np.ndarray = field(default=None)


def linear_heads(x, weights, shape_info=None):
    cfg = weights.cfg
    E, C, _, H, W = x.dims.as_tuple()
    w, b = weights.linear("head.color")
    logits = ad.linear_project(x[COLOR_KEY], w, ad.affine_scale(b, cfg.color_bias_scale))
    logits = ad.reshape(logits, (E, C, H, W, 2))
    black = np.zeros((E, 1, H, W, 2), dtype=logits.data.dtype)
    logits = ad.concat([ad.const(black), logits], axis=1)

    ws, bs = weights.linear("head.shape", ROW_KEY)
    rows = ad.reshape(ad.linear_project(x[ROW_KEY], ws, bs), (E, H, 2))
    cols = ad.reshape(ad.linear_project(x[COL_KEY], ws, bs), (E, W, 2))
    fixed = np.zeros((E, 2), dtype=bool)
    if shape_info is not None:
        fixed = shape_info.fixed
        free = (~fixed)[:, None, :].astype(float)
        pin_r = fixed[:, None, :] * PINNED * (2.0 * shape_info.row_masks - 1.0)
        pin_c = fixed[:, None, :] * PINNED * (2.0 * shape_info.col_masks - 1.0)
        rows = ad.add(ad.mul(rows, free), pin_r)
        cols = ad.add(ad.mul(cols, free), pin_c)
    return HeadOutput(logits, rows, cols, fixed)


# ---------------------------------------------------------------- likelihood

def coefficient_schedule(step, warmup=100, start=0.1):
    """Slice-sharpness coefficient: start at 0.1, reach 1 exponentially by ``warmup``."""
    return start ** (1.0 - min(step, warmup) / warmup)


def _range_matrix(n):
    """All contiguous ranges [a, b) of 0..n, and the +1 inside / -1 outside matrix."""
    ranges = [(a, b) for a in range(n) for b in range(a + 1, n + 1)]
    m = -np.ones((len(ranges), n))
    for r, (a, b) in enumerate(ranges):
        m[r, a:b] = 1.0
    return ranges, m


_RANGE_CACHE = {}


def range_matrix(n):
    if n not in _RANGE_CACHE:
        _RANGE_CACHE[n] = _range_matrix(n)
    return _RANGE_CACHE[n]


@dataclass
class GridTarget:
    example: int
    side: int
    cells: np.ndarray   # class indices
    fixed: bool


def grid_targets(puzzle, colormap, shape_info):
    return [
        GridTarget(e, side, colormap.encode(g.cells), bool(shape_info.fixed[e, side]))
        for e, side, g in puzzle.known_grids()
    ]


def range_log_probs(scores):
    """Log-probability of every contiguous range given per-position scores (1-D tensor)."""
    n = scores.shape[0]
    _, m = range_matrix(n)
    logw = ad.linear_project(ad.reshape(scores, (1, n)), ad.const(m.T))
    return ad.reshape(ad.log_softmax(logw, 1), (m.shape[0],))


def reconstruction_loss(heads, targets, step):
    """Negative log-likelihood (nats) of all target grids under the head distribution."""
    coef = coefficient_schedule(step)
    logits = heads.color_logits
    _, _, H, W, _ = logits.shape
    logp = ad.log_softmax(logits, 1)
    terms = []

    pinned = [t for t in targets if t.fixed]
    if pinned:
        idx = [np.concatenate(v) for v in zip(*(
            (np.full(t.cells.size, t.example), t.cells.ravel(),
             np.repeat(np.arange(t.cells.shape[0]), t.cells.shape[1]),
             np.tile(np.arange(t.cells.shape[1]), t.cells.shape[0]),
             np.full(t.cells.size, t.side)) for t in pinned))]
        terms.append(ad.sum_reduce(ad.take(logp, tuple(idx))))

    for t in targets:
        if t.fixed:
            continue
        h, w = t.cells.shape
        if h > H or w > W:
            raise ValueError(f"grid {h}x{w} does not fit the {H}x{W} canvas")
        rows = ad.affine_scale(ad.take(heads.row_scores, (t.example, slice(None), t.side)), coef * coef)
        cols = ad.affine_scale(ad.take(heads.col_scores, (t.example, slice(None), t.side)), coef * coef)
        row_lp = range_log_probs(rows)
        col_lp = range_log_probs(cols)
        row_ranges, _ = range_matrix(H)
        col_ranges, _ = range_matrix(W)
        ri = [i for i, (a, b) in enumerate(row_ranges) if b - a == h]
        ci = [i for i, (a, b) in enumerate(col_ranges) if b - a == w]
        pa, pc = H - h + 1, W - w + 1
        A = np.arange(pa)[:, None, None, None] + np.arange(h)[None, None, :, None]
        B = np.arange(pc)[None, :, None, None] + np.arange(w)[None, None, None, :]
        A, B = np.broadcast_arrays(A, B)
        cls = np.broadcast_to(t.cells[None, None], A.shape)
        color_ll = ad.sum_reduce(ad.take(logp, (t.example, cls, A, B, t.side)), (2, 3))
        total = ad.add(ad.add(ad.reshape(ad.take(row_lp, np.array(ri)), (pa, 1)),
                              ad.reshape(ad.take(col_lp, np.array(ci)), (1, pc))), color_ll)
        terms.append(ad.affine_scale(ad.logsumexp(ad.affine_scale(total, coef)), 1.0 / coef))

    ll = terms[0]
    for t in terms[1:]:
        ll = ad.add(ll, t)
    return ad.affine_scale(ll, -1.0)


# ---------------------------------------------------------------- answers

def best_range(scores):
    n = scores.shape[0]
    ranges, m = range_matrix(n)
    return ranges[int(np.argmax(m @ scores))]


def read_answer(logits, rows, cols, example, fixed_shape=None):
    """Argmax colors inside the most probable output slice.

    Returns (class-index grid, uncertainty) where uncertainty is the mean
    negative log-probability of each pixel's top class.
    """
    if fixed_shape is not None:
        (r0, r1), (c0, c1) = (0, fixed_shape[0]), (0, fixed_shape[1])
    else:
        r0, r1 = best_range(rows[example, :, OUTPUT])
        c0, c1 = best_range(cols[example, :, OUTPUT])
    lg = logits[example, :, r0:r1, c0:c1, OUTPUT]
    m = lg.max(axis=0, keepdims=True)
    logp_top = -np.log(np.exp(lg - m).sum(axis=0))
    return lg.argmax(axis=0), float(np.mean(-logp_top))
