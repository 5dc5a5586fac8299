"""Small reverse-mode autodiff tape over numpy arrays, plus Adam.

Only the operations the network needs are provided.  Every primitive records
its parents and a closure mapping the output adjoint to parent adjoints.
Binary elementwise ops follow numpy broadcasting; adjoints are summed back
down to the operand shape.
"""
from __future__ import annotations

import numpy as np

DEFAULT_DTYPE = np.float64


class NonFiniteGradient(FloatingPointError):
    pass


class Tensor:
    """A node on the tape."""

    __slots__ = ("data", "grad", "parents", "backward_fn", "requires_grad", "name")

    def __init__(self, data, parents=(), backward_fn=None, requires_grad=False, name=None):
        self.data = np.asarray(data)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def zero_grad(self):
        self.grad = None

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, name={self.name!r})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)


def param(data, name=None, dtype=None):
    """A leaf that receives gradients."""
    return Tensor(np.array(data, dtype=dtype or DEFAULT_DTYPE), requires_grad=True, name=name)


def const(data, dtype=None):
    if isinstance(data, Tensor):
        return data
    arr = np.asarray(data)
    if dtype is not None:
        arr = arr.astype(dtype, copy=False)
    elif arr.dtype.kind != "f":
        arr = arr.astype(DEFAULT_DTYPE)
    return Tensor(arr)


def _node(data, parents, backward_fn):
    parents = tuple(parents)
    if not any(p.requires_grad for p in parents):
        return Tensor(data)
    return Tensor(data, parents, backward_fn)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    nd = g.ndim - len(shape)
    if nd > 0:
        g = g.sum(axis=tuple(range(nd)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _axes(axes, ndim):
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    return tuple(sorted(a % ndim for a in axes))


def _count(shape, axes):
    n = 1
    for a in axes:
        n *= shape[a]
    return n


# ---------------------------------------------------------------- elementwise

def add(a, b):
    a, b = const(a), const(b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(a.data + b.data, (a, b), bw)


def sub(a, b):
    a, b = const(a), const(b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _node(a.data - b.data, (a, b), bw)


def mul(a, b):
    a, b = const(a), const(b)

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _node(a.data * b.data, (a, b), bw)


def div(a, b):
    a, b = const(a), const(b)
    out = a.data / b.data

    def bw(g):
        gb = g / b.data
        return _unbroadcast(gb, a.shape), _unbroadcast(-gb * out, b.shape)

    return _node(out, (a, b), bw)


def affine_scale(x, scale, shift=0.0):
    """scale * x + shift with constant scale/shift."""
    x = const(x)

    def bw(g):
        return (_unbroadcast(g * scale, x.shape),)

    return _node(x.data * scale + shift, (x,), bw)


def _unary(x, fwd, dfwd):
    x = const(x)
    out = fwd(x.data)

    def bw(g):
        return (g * dfwd(x.data, out),)

    return _node(out, (x,), bw)


def exp(x):
    return _unary(x, np.exp, lambda x, y: y)


def expm1(x):
    return _unary(x, np.expm1, lambda x, y: y + 1.0)


def log(x):
    return _unary(x, np.log, lambda x, y: 1.0 / x)


def sqrt(x):
    return _unary(x, np.sqrt, lambda x, y: 0.5 / y)


def square(x):
    return _unary(x, np.square, lambda x, y: 2.0 * x)


def _sigmoid(x):
    return 0.5 + 0.5 * np.tanh(0.5 * x)


def sigmoid(x):
    return _unary(x, _sigmoid, lambda x, y: y * (1.0 - y))


def silu(x):
    def d(x, y):
        s = _sigmoid(x)
        return s * (1.0 + x * (1.0 - s))

    return _unary(x, lambda v: v * _sigmoid(v), d)


def _log_expm1(x):
    # log(exp(x) - 1) without overflow for large x
    big = x > 20.0
    safe = np.where(big, 1.0, x)
    return np.where(big, x + np.log1p(-np.exp(-np.where(big, x, 20.0))), np.log(np.expm1(safe)))


def log_expm1(x):
    # d/dx log(e^x - 1) = 1 / (1 - e^-x)
    return _unary(x, _log_expm1, lambda x, y: -1.0 / np.expm1(-x))


# ---------------------------------------------------------------- reductions

def sum_reduce(x, axes=None, keepdims=False):
    x = const(x)
    ax = _axes(axes, x.ndim)
    out = x.data.sum(axis=ax, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, ax)
        return (np.broadcast_to(g, x.shape),)

    return _node(out, (x,), bw)


def mean_reduce(x, axes=None, keepdims=False):
    x = const(x)
    ax = _axes(axes, x.ndim)
    n = max(_count(x.shape, ax), 1)
    out = x.data.sum(axis=ax, keepdims=keepdims) / n

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, ax)
        return (np.broadcast_to(g / n, x.shape),)

    return _node(out, (x,), bw)


def weighted_sum(x, w, axes, keepdims=True):
    """sum(x * w, axes) with a constant weight array w."""
    x = const(x)
    w = np.asarray(w)
    ax = _axes(axes, x.ndim)
    out = (x.data * w).sum(axis=ax, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, ax)
        return (_unbroadcast(np.broadcast_to(g, x.shape) * w, x.shape),)

    return _node(out, (x,), bw)


def max_reduce(x, axes, keepdims=True):
    """Maximum over axes; the adjoint goes to the first maximal element."""
    x = const(x)
    ax = _axes(axes, x.ndim)
    keep = tuple(i for i in range(x.ndim) if i not in ax)
    moved = np.moveaxis(x.data, ax, tuple(range(x.ndim - len(ax), x.ndim)))
    flat = moved.reshape(moved.shape[: len(keep)] + (-1,))
    if flat.shape[-1] == 0:
        raise ValueError("max over an empty axis set")
    idx = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    if keepdims:
        out = np.expand_dims(out, ax)

    def bw(g):
        if keepdims:
            g = np.squeeze(g, axis=ax)
        gflat = np.zeros(flat.shape, dtype=g.dtype)
        np.put_along_axis(gflat, idx[..., None], g[..., None], axis=-1)
        gm = gflat.reshape(moved.shape)
        return (np.moveaxis(gm, tuple(range(x.ndim - len(ax), x.ndim)), ax),)

    return _node(out, (x,), bw)


def _lse(a, ax):
    m = a.max(axis=ax, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return m + np.log(np.exp(a - m).sum(axis=ax, keepdims=True))


def logsumexp(x, axes=None, keepdims=False):
    x = const(x)
    ax = _axes(axes, x.ndim)
    if not ax:
        raise ValueError("logsumexp over an empty axis set")
    lse = _lse(x.data, ax)
    out = lse if keepdims else np.squeeze(lse, axis=ax)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, ax)
        return (g * np.exp(x.data - lse),)

    return _node(out, (x,), bw)


def softmax(x, axes):
    x = const(x)
    ax = _axes(axes, x.ndim)
    if not ax:
        raise ValueError("softmax over an empty axis set")
    y = np.exp(x.data - _lse(x.data, ax)) if x.data.size else x.data.copy()

    def bw(g):
        return (y * (g - (g * y).sum(axis=ax, keepdims=True)),)

    return _node(y, (x,), bw)


def log_softmax(x, axes):
    x = const(x)
    ax = _axes(axes, x.ndim)
    out = x.data - _lse(x.data, ax) if x.data.size else x.data.copy()

    def bw(g):
        return (g - np.exp(out) * g.sum(axis=ax, keepdims=True),)

    return _node(out, (x,), bw)


def normalize(x, axes, eps=1e-8):
    """Zero mean, unit population variance over axes."""
    x = const(x)
    ax = _axes(axes, x.ndim)
    n = _count(x.shape, ax)
    if n == 0 or x.data.size == 0:
        return affine_scale(x, 1.0)
    mu = x.data.sum(axis=ax, keepdims=True) / n
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).sum(axis=ax, keepdims=True) / n + eps)
    y = xc * inv

    def bw(g):
        gm = g.sum(axis=ax, keepdims=True) / n
        gym = (g * y).sum(axis=ax, keepdims=True) / n
        return (inv * (g - gm - y * gym),)

    return _node(y, (x,), bw)


# ---------------------------------------------------------------- structure

def linear_project(x, w, b=None):
    """x[..., i] @ w[i, o] + b[o] on the last (channel) axis."""
    x, w = const(x), const(w)
    out = x.data @ w.data
    parents = [x, w]
    if b is not None:
        b = const(b)
        out = out + b.data
        parents.append(b)

    def bw(g):
        gi = g.reshape(-1, g.shape[-1])
        xi = x.data.reshape(-1, x.shape[-1])
        grads = [g @ w.data.T, xi.T @ gi]
        if b is not None:
            grads.append(gi.sum(axis=0))
        return tuple(grads)

    return _node(out, parents, bw)


def einsum(spec, a, b):
    """Two-operand einsum; every operand index must appear in the other operand or the output."""
    a, b = const(a), const(b)
    ins, out_idx = spec.split("->")
    ia, ib = ins.split(",")
    out = np.einsum(spec, a.data, b.data, optimize=True)

    def bw(g):
        ga = np.einsum(f"{out_idx},{ib}->{ia}", g, b.data, optimize=True) if a.requires_grad else None
        gb = np.einsum(f"{out_idx},{ia}->{ib}", g, a.data, optimize=True) if b.requires_grad else None
        return ga, gb

    return _node(out, (a, b), bw)


def broadcast_to(x, shape):
    x = const(x)

    def bw(g):
        return (_unbroadcast(g, x.shape),)

    return _node(np.broadcast_to(x.data, shape), (x,), bw)


def reshape(x, shape):
    x = const(x)

    def bw(g):
        return (g.reshape(x.shape),)

    return _node(x.data.reshape(shape), (x,), bw)


def concat(xs, axis=-1):
    xs = [const(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    cuts = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, cuts, axis=axis))

    return _node(np.concatenate([x.data for x in xs], axis=axis), xs, bw)


def take(x, index):
    """x[index] for a basic or advanced numpy index; adjoint scatters additively."""
    x = const(x)
    out = x.data[index]

    basic = all(isinstance(i, (slice, int)) or i is None for i in (index if isinstance(index, tuple) else (index,)))

    def bw(g):
        gx = np.zeros(x.shape, dtype=g.dtype)
        if basic:
            gx[index] += g
        else:
            np.add.at(gx, index, g)
        return (gx,)

    return _node(out, (x,), bw)


def _shift_array(a, dh, dw, ah, aw, fill=0.0):
    out = np.full_like(a, fill)
    H, W = a.shape[ah], a.shape[aw]
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    src[ah] = slice(max(0, -dh), H - max(0, dh))
    dst[ah] = slice(max(0, dh), H - max(0, -dh))
    src[aw] = slice(max(0, -dw), W - max(0, dw))
    dst[aw] = slice(max(0, dw), W - max(0, -dw))
    out[tuple(dst)] = a[tuple(src)]
    return out


def shift_by_one(x, step, axes=(-2, -1)):
    """Move content one pixel along step=(dh, dw), zero filling the vacated border."""
    x = const(x)
    ah, aw = (a % x.ndim for a in axes)
    dh, dw = step

    def bw(g):
        return (_shift_array(g, -dh, -dw, ah, aw),)

    return _node(_shift_array(x.data, dh, dw, ah, aw), (x,), bw)


def _roll_last(a, d):
    return np.roll(a, d, axis=-1) if d else a


def _cummax_with_source(a, dh, dw):
    """Running max along (dh, dw) over the last two axes, with the winning flat position.

    Each output pixel p takes max(a[p], out[p - step]); a strict improvement is
    needed to move the source, so ties keep the earliest element in scan order.
    """
    H, W = a.shape[-2:]
    out = a.copy()
    pos = np.broadcast_to(np.arange(H * W).reshape(H, W), a.shape).copy()
    if dh != 0:
        rows = range(1, H) if dh > 0 else range(H - 2, -1, -1)
        valid = np.ones(W, dtype=bool)
        if dw > 0:
            valid[:dw] = False
        elif dw < 0:
            valid[dw:] = False
        for i in rows:
            prev_v = _roll_last(out[..., i - dh, :], dw)
            prev_p = _roll_last(pos[..., i - dh, :], dw)
            better = valid & (prev_v >= out[..., i, :])
            out[..., i, :] = np.where(better, prev_v, out[..., i, :])
            pos[..., i, :] = np.where(better, prev_p, pos[..., i, :])
    else:
        cols = range(1, W) if dw > 0 else range(W - 2, -1, -1)
        for j in cols:
            prev_v = out[..., j - dw]
            better = prev_v >= out[..., j]
            out[..., j] = np.where(better, prev_v, out[..., j])
            pos[..., j] = np.where(better, pos[..., j - dw], pos[..., j])
    return out, pos


def cumulative_max(x, step, axes=(-2, -1)):
    """Running maximum in compass step=(dh, dw) over the (height, width) axes.

    ``prev >= current`` keeps the earlier source on ties, so the adjoint lands
    on the earliest maximal element along the scan.
    """
    x = const(x)
    ah, aw = (a % x.ndim for a in axes)
    dh, dw = step
    moved = np.moveaxis(x.data, (ah, aw), (-2, -1))
    out, pos = _cummax_with_source(moved, dh, dw)
    H, W = moved.shape[-2:]
    lead = moved.shape[:-2]

    def bw(g):
        gm = np.moveaxis(g, (ah, aw), (-2, -1)).reshape(-1, H * W)
        B = gm.shape[0]
        idx = (pos.reshape(B, H * W) + (np.arange(B) * H * W)[:, None]).ravel()
        gx = np.bincount(idx, weights=gm.ravel(), minlength=B * H * W)
        gx = gx.reshape(lead + (H, W)).astype(g.dtype, copy=False)
        return (np.moveaxis(gx, (-2, -1), (ah, aw)),)

    return _node(np.moveaxis(out, (-2, -1), (ah, aw)), (x,), bw)


def _direction_plan(n_channels, steps):
    """(direction index, channel slice, step) triples: first half forwards, second half reversed."""
    half = n_channels // 2
    plan = []
    for d, (dh, dw) in enumerate(steps):
        plan.append((d, slice(0, half), (dh, dw)))
        plan.append((d, slice(half, n_channels), (-dh, -dw)))
    return plan


def directional_cummax(x, steps, dir_axis=2, axes=(3, 4)):
    """Cumulative max of each direction slice along its own compass step.

    Slice ``d`` of ``dir_axis`` is scanned along ``steps[d]`` in the first half
    of the channels and along the opposite step in the second half.  One tape
    node; the adjoint is routed like ``cumulative_max``.
    """
    x = const(x)
    nd = x.ndim
    ah, aw = (a % nd for a in axes)
    moved = np.moveaxis(x.data, (dir_axis, ah, aw), (0, -2, -1))
    out = np.empty_like(moved)
    pos = np.empty(moved.shape, dtype=np.int64)
    plan = _direction_plan(moved.shape[-3], steps)
    for d, ch, step in plan:
        o, p = _cummax_with_source(moved[d, ..., ch, :, :], *step)
        out[d, ..., ch, :, :] = o
        pos[d, ..., ch, :, :] = p
    H, W = moved.shape[-2:]

    def bw(g):
        gm = np.moveaxis(g, (dir_axis, ah, aw), (0, -2, -1))
        flat_g = gm.reshape(-1, H * W)
        B = flat_g.shape[0]
        idx = (pos.reshape(B, H * W) + (np.arange(B) * H * W)[:, None]).ravel()
        gx = np.bincount(idx, weights=flat_g.ravel(), minlength=B * H * W).reshape(moved.shape)
        return (np.moveaxis(gx.astype(g.dtype, copy=False), (0, -2, -1), (dir_axis, ah, aw)),)

    return _node(np.moveaxis(out, (0, -2, -1), (dir_axis, ah, aw)), (x,), bw)


def directional_shift(x, steps, dir_axis=2, axes=(3, 4)):
    """Shift of each direction slice by one pixel along its own step (zero fill)."""
    x = const(x)
    nd = x.ndim
    ah, aw = (a % nd for a in axes)
    plan = _direction_plan(x.shape[-1], steps)

    def run(a, sign):
        moved = np.moveaxis(a, (dir_axis, ah, aw), (0, -2, -1))
        res = np.empty_like(moved)
        for d, ch, (dh, dw) in plan:
            res[d, ..., ch, :, :] = _shift_array(moved[d, ..., ch, :, :], sign * dh, sign * dw, -2, -1)
        return np.moveaxis(res, (0, -2, -1), (dir_axis, ah, aw))

    def bw(g):
        return (run(g, -1),)

    return _node(run(x.data, 1), (x,), bw)


# ---------------------------------------------------------------- backward

def _toposort(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root):
    """Accumulate d(root)/d(leaf) into ``.grad`` of every reachable leaf."""
    if root.data.size != 1:
        raise ValueError(f"backward needs a scalar root, got shape {root.shape}")
    order = _toposort(root)
    grads = {id(root): np.ones_like(root.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.backward_fn is None:
            node.grad = g if node.grad is None else node.grad + g
            continue
        for p, gp in zip(node.parents, node.backward_fn(g)):
            if gp is None or not p.requires_grad:
                continue
            k = id(p)
            grads[k] = gp if k not in grads else grads[k] + gp


# ---------------------------------------------------------------- optimizer

class Adam:
    """Bias-corrected Adam; defaults are the inference-time training settings."""

    def __init__(self, lr=0.01, beta1=0.5, beta2=0.9, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params, grads=None):
        """Update ``params`` (name -> Tensor) in place.

        Gradients default to each tensor's ``.grad``; a missing gradient is
        treated as zero.  Raises NonFiniteGradient before touching any state.
        """
        if grads is None:
            grads = {k: p.grad for k, p in params.items()}
        for k, g in grads.items():
            if g is not None and not np.all(np.isfinite(g)):
                raise NonFiniteGradient(f"non-finite gradient for {k}")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, p in params.items():
            g = grads.get(k)
            if g is None:
                g = np.zeros_like(p.data)
            if k not in self.m:
                self.m[k] = np.zeros_like(p.data)
                self.v[k] = np.zeros_like(p.data)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            mhat = self.m[k] / bc1
            vhat = self.v[k] / bc2
            p.data = p.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)
