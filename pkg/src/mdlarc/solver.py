"""Per-puzzle inference-time training and answer selection."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .layers import (
    ArchConfig,
    LatentParams,
    NetworkWeights,
    decode_latent,
    forward_network,
    grid_targets,
    linear_heads,
    read_answer,
    reconstruction_loss,
)
from .multitensor import LEGAL_KEYS, Dims
from .puzzle import OUTPUT, build_color_map, infer_shape_rules

log = logging.getLogger(__name__)

DEFAULT_CHECKPOINTS = tuple(range(100, 2001, 100))


@dataclass
class SolverConfig:
    steps: int = 2000
    lr: float = 0.01
    beta1: float = 0.5
    beta2: float = 0.9
    recon_weight: float = 10.0
    ema_decay: float = 0.97
    warmup: int = 150
    seed: int = 0
    dtype: str = "float64"
    checkpoints: tuple = DEFAULT_CHECKPOINTS
    arch: ArchConfig = field(default_factory=ArchConfig)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if not 0.0 < self.ema_decay < 1.0:
            raise ValueError("ema_decay must lie in (0, 1)")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be float64 or float32")
        self.checkpoints = tuple(int(c) for c in self.checkpoints)

    @classmethod
    def from_mapping(cls, blob):
        known = {f.name for f in fields(cls)}
        defaults = cls()
        kw = {}
        for k, v in blob.items():
            if k not in known:
                raise ValueError(f"unknown solver setting {k!r}")
            if k == "arch":
                v = v if isinstance(v, ArchConfig) else ArchConfig(**v)
            elif k == "checkpoints":
                v = tuple(int(c) for c in (v.split(",") if isinstance(v, str) else v) if str(c).strip())
            elif k == "dtype":
                v = str(v)
            elif isinstance(v, str):
                v = type(getattr(defaults, k))(v)
            kw[k] = v
        return cls(**kw)

    @classmethod
    def from_file(cls, path):
        """Read a JSON object or ``key = value`` lines (``#`` starts a comment)."""
        text = Path(path).read_text()
        try:
            blob = json.loads(text)
        except json.JSONDecodeError:
            blob = {}
            for line in text.splitlines():
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"expected key=value, got {line!r}")
                k, v = (s.strip() for s in line.split("=", 1))
                blob[k] = v
        return cls.from_mapping(blob)

    def to_dict(self):
        d = asdict(self)
        d["checkpoints"] = list(self.checkpoints)
        return d


# ---------------------------------------------------------------- candidates

def answer_key(answer):
    """Canonical hashable form of a joint answer (tuple of 2-D int arrays)."""
    return tuple((a.shape[0], a.shape[1], tuple(int(v) for v in a.ravel())) for a in answer)


def answer_digest(answer):
    return hashlib.sha1(repr(answer_key(answer)).encode()).hexdigest()[:12]


@dataclass
class CandidateSet:
    log_weight: dict = field(default_factory=dict)
    answers: dict = field(default_factory=dict)
    first_seen: dict = field(default_factory=dict)
    _counter: int = 0

    def add(self, answer, log_w):
        k = answer_key(answer)
        if k in self.log_weight:
            self.log_weight[k] = float(np.logaddexp(self.log_weight[k], log_w))
        else:
            self.log_weight[k] = float(log_w)
            self.answers[k] = tuple(np.array(a) for a in answer)
            self.first_seen[k] = self._counter
            self._counter += 1

    def __len__(self):
        return len(self.log_weight)


def candidate_log_weight(step, uncertainty, from_ema, warmup=150):
    lw = -10.0 * uncertainty
    if step < warmup:
        lw -= 10.0
    if from_ema:
        lw -= 4.0
    return lw


def accumulate_candidates(cs, sampled, ema_answer, step, uncertainty, ema_uncertainty=None, warmup=150):
    """Count the sampled and the EMA-derived answer of one step."""
    if ema_uncertainty is None:
        ema_uncertainty = uncertainty
    cs.add(sampled, candidate_log_weight(step, uncertainty, False, warmup))
    if ema_answer is not None:
        cs.add(ema_answer, candidate_log_weight(step, ema_uncertainty, True, warmup))
    return cs


def select_top_k(cs, k=2):
    if not len(cs):
        raise ValueError("no candidates were accumulated")
    order = sorted(cs.log_weight, key=lambda a: (-cs.log_weight[a], cs.first_seen[a], a))
    out = [cs.answers[a] for a in order[:k]]
    while len(out) < k:
        out.append(out[0])
    return out


# ---------------------------------------------------------------- trace

class Trace:
    def __init__(self):
        self.rows = []

    def __len__(self):
        return len(self.rows)

    def append(self, row):
        self.rows.append(row)

    @staticmethod
    def columns():
        return ["step", "loss", "kl_total", "recon"] + [f"kl[{k.name}]" for k in LEGAL_KEYS]

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns() + ["answer"])
        for r in self.rows:
            w.writerow([r["step"], repr(r["loss"]), repr(r["kl_total"]), repr(r["recon"])]
                       + [repr(v) for v in r["kl"]] + [r["answer"]])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


@dataclass
class SolveResult:
    puzzle_id: str
    attempts: list          # k joint answers, each a list of color-code grids (one per test pair)
    trace: Trace
    checkpoints: dict       # step -> attempts at that point
    skipped_steps: list
    n_params: int = 0
    problem: object = None  # trained weights and latents, for diagnostics

    def attempts_json(self):
        return attempts_to_json(self.attempts)


def attempts_to_json(attempts):
    """Per test pair, {"attempt_1": grid, "attempt_2": grid, ...} as nested lists."""
    return [
        {f"attempt_{i + 1}": att[t].tolist() for i, att in enumerate(attempts)}
        for t in range(len(attempts[0]))
    ]


# ---------------------------------------------------------------- solve

def _all_black(p, si):
    out = []
    demo_shapes = Counter(q.output.shape for q in p.train)
    for e in range(p.n_train, p.n_example):
        shape = si.predicted[e] or demo_shapes.most_common(1)[0][0]
        out.append(np.zeros(shape, dtype=np.int64))
    return out


def _read_joint(p, si, cm, logits, rows, cols):
    grids, unc = [], []
    for e in range(p.n_train, p.n_example):
        fixed = si.predicted[e] if si.fixed[e, OUTPUT] else None
        idx, u = read_answer(logits, rows, cols, e, fixed)
        grids.append(cm.decode(idx))
        unc.append(u)
    return grids, float(np.mean(unc))


@dataclass
class Problem:
    """Everything trained or consulted while solving one puzzle."""

    weights: NetworkWeights
    latent: LatentParams
    masks: object
    targets: list
    shape_info: object

    @property
    def params(self):
        return {**self.weights.params, **self.latent.params}


def build_problem(p, cfg, rng, si=None, cm=None):
    """Initialize weights and latents for puzzle ``p`` from ``rng``."""
    dtype = np.float64 if cfg.dtype == "float64" else np.float32
    si = si or infer_shape_rules(p)
    cm = cm or build_color_map(p)
    dims = Dims(p.n_example, cm.n_colors, si.canvas_h, si.canvas_w)
    weights = NetworkWeights(cfg.arch, rng, dtype)
    latent = LatentParams(dims, cfg.arch, rng, dtype)
    return Problem(weights, latent, si.grid_masks(), grid_targets(p, cm, si), si)


def step_loss(prob, rng, step, recon_weight=10.0):
    """One stochastic pass: returns (loss, kl_total, recon, per-key kl, heads)."""
    z, kl = decode_latent(prob.latent, prob.weights, rng)
    x = forward_network(prob.weights, z, prob.masks)
    heads = linear_heads(x, prob.weights, prob.shape_info)
    recon = reconstruction_loss(heads, prob.targets, step)
    kl_total = kl[LEGAL_KEYS[0]]
    for k in LEGAL_KEYS[1:]:
        kl_total = ad.add(kl_total, kl[k])
    loss = ad.add(kl_total, ad.affine_scale(recon, recon_weight))
    return loss, kl_total, recon, kl, heads


def solve_puzzle(p, cfg=None, progress=None):
    """Train on one puzzle and return its top-2 attempts with a per-step trace."""
    cfg = cfg or SolverConfig()
    si = infer_shape_rules(p)
    cm = build_color_map(p)
    trace = Trace()
    if cm.n_colors == 0:
        black = _all_black(p, si)
        return SolveResult(p.id, [black, black], trace, {}, [])

    root = np.random.SeedSequence(cfg.seed)
    init_rng, noise_rng = (np.random.default_rng(s) for s in root.spawn(2))
    prob = build_problem(p, cfg, init_rng, si, cm)
    params = prob.params
    opt = ad.Adam(cfg.lr, cfg.beta1, cfg.beta2)

    cs = CandidateSet()
    ema = None
    checkpoints, skipped = {}, []
    for step in range(cfg.steps):
        loss, kl_total, recon, kl, heads = step_loss(prob, noise_rng, step, cfg.recon_weight)

        lv = float(loss.data)
        if math.isfinite(lv):
            for t in params.values():
                t.zero_grad()
            ad.backward(loss)
            try:
                opt.step(params)
            except ad.NonFiniteGradient:
                skipped.append(step)
                log.warning("%s: non-finite gradient at step %d, update skipped", p.id, step)
        else:
            skipped.append(step)
            log.warning("%s: non-finite loss at step %d, update skipped", p.id, step)

        snap = (heads.color_logits.data, heads.row_scores.data, heads.col_scores.data)
        if ema is None:
            ema = tuple(a.copy() for a in snap)
        else:
            d = cfg.ema_decay
            ema = tuple(d * e + (1.0 - d) * a for e, a in zip(ema, snap))
        sampled, unc = _read_joint(p, si, cm, *snap)
        ema_ans, ema_unc = _read_joint(p, si, cm, *ema)
        accumulate_candidates(cs, sampled, ema_ans, step, unc, ema_unc, cfg.warmup)

        trace.append({
            "step": step,
            "loss": lv,
            "kl_total": float(kl_total.data),
            "recon": float(recon.data),
            "kl": [float(kl[k].data) for k in LEGAL_KEYS],
            "answer": answer_digest(sampled),
        })
        if step + 1 in cfg.checkpoints:
            checkpoints[step + 1] = select_top_k(cs, 2)
        if progress is not None:
            progress(step, trace.rows[-1])

    return SolveResult(p.id, select_top_k(cs, 2), trace, checkpoints, skipped, prob.weights.count(), prob)
