"""Seed-index rejection sampling and empirical checks of its code-length bounds.

A sender and receiver share a stream of proposals z_1, z_2, ... drawn from P.
The sender accepts z_i with probability min(1, c q(z_i) / p(z_i)) and transmits
the index of the first acceptance.  The expected log index is at most
KL(Q||P) + ln(1 + c) - ln(c), and the per-proposal acceptance rate is at least
c / (1 + c) exp(-KL(Q||P)).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


class IterationCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Gaussian:
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def sample(self, rng, n):
        return self.mu + self.sigma * rng.standard_normal(n)

    def log_density(self, x):
        u = (np.asarray(x) - self.mu) / self.sigma
        return -0.5 * u * u - math.log(self.sigma) - 0.5 * math.log(2 * math.pi)

    def cdf(self, x):
        u = (np.asarray(x, dtype=float) - self.mu) / (self.sigma * math.sqrt(2.0))
        return 0.5 * (1.0 + np.vectorize(math.erf)(u))


@dataclass(frozen=True)
class Categorical:
    probs: tuple

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or not 1 <= p.size <= 16:
            raise ValueError("a categorical needs 1 to 16 outcomes")
        if np.any(p < 0) or not math.isclose(p.sum(), 1.0, rel_tol=1e-9):
            raise ValueError("probabilities must be non-negative and sum to 1")
        object.__setattr__(self, "probs", tuple(float(v) for v in p))

    @classmethod
    def from_logits(cls, logits):
        a = np.asarray(logits, dtype=float)
        a = np.exp(a - a.max())
        return cls(tuple(a / a.sum()))

    @classmethod
    def delta(cls, k, n):
        p = np.zeros(n)
        p[k] = 1.0
        return cls(tuple(p))

    def sample(self, rng, n):
        cum = np.cumsum(self.probs)
        return np.minimum(np.searchsorted(cum, rng.random(n), side="right"), len(self.probs) - 1)

    def log_density(self, x):
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(self.probs))[np.asarray(x)]


def gaussian_kl(mu, sigma, mu_p=0.0, sigma_p=1.0):
    """KL(N(mu, sigma^2) || N(mu_p, sigma_p^2)) in nats."""
    if sigma <= 0 or sigma_p <= 0:
        raise ValueError("standard deviations must be positive")
    r = (sigma / sigma_p) ** 2
    return 0.5 * (((mu - mu_p) / sigma_p) ** 2 + r - 1.0 - math.log(r))


def categorical_kl(q, p):
    q = np.asarray(q.probs)
    p = np.asarray(p.probs)
    nz = q > 0
    if np.any(p[nz] == 0):
        return math.inf
    return float(np.sum(q[nz] * np.log(q[nz] / p[nz])))


@dataclass(frozen=True)
class DistPair:
    """Target Q, proposal P and acceptance scale c."""

    target: object
    proposal: object
    c: float = 1.0

    def __post_init__(self):
        if not 0 < self.c <= 1:
            raise ValueError("c must lie in (0, 1]")
        if type(self.target) is not type(self.proposal):
            raise ValueError("target and proposal must be the same family")
        if not math.isfinite(self.kl()):
            raise ValueError("KL(Q||P) must be finite")

    def kl(self):
        if isinstance(self.target, Gaussian):
            t, p = self.target, self.proposal
            return gaussian_kl(t.mu, t.sigma, p.mu, p.sigma)
        return categorical_kl(self.target, self.proposal)

    def accept_prob(self, z):
        log_w = self.target.log_density(z) - self.proposal.log_density(z)
        return np.minimum(1.0, self.c * np.exp(log_w))


def seed_length_bound(kl, c):
    return kl + math.log1p(c) - math.log(c)


def acceptance_lower_bound(kl, c):
    return c / (1.0 + c) * math.exp(-kl)


def rejection_sample(dp, rng, max_iter=10**7, chunk=1024):
    """One sample and its 1-based seed index, scanning proposals in order."""
    seen = 0
    while seen < max_iter:
        n = min(chunk, max_iter - seen)
        z = dp.proposal.sample(rng, n)
        hit = np.flatnonzero(rng.random(n) < dp.accept_prob(z))
        if hit.size:
            i = int(hit[0])
            return z[i], seen + i + 1
        seen += n
        chunk = min(chunk * 2, 1 << 20)
    raise IterationCapExceeded(f"no proposal accepted within {max_iter} draws")


def run_trials(dp, trials, rng, max_iter=10**7, chunk=1 << 20):
    """Consecutive rejection-sampling trials on one shared proposal stream.

    Each trial resumes the stream right after the previous acceptance, so the
    results are identical to calling ``rejection_sample`` repeatedly on a
    stream that is never rewound.  Returns (samples, seed_indices, n_proposals).
    """
    samples, seeds = [], []
    carry = 0  # proposals consumed by the trial still in progress
    total = 0
    while len(seeds) < trials:
        z = dp.proposal.sample(rng, chunk)
        accept = rng.random(chunk) < dp.accept_prob(z)
        hits = np.flatnonzero(accept)
        total += chunk
        if hits.size == 0:
            carry += chunk
            if carry > max_iter:
                raise IterationCapExceeded(f"no proposal accepted within {max_iter} draws")
            continue
        gaps = np.diff(np.concatenate(([-1], hits)))
        gaps[0] += carry
        if gaps.max() > max_iter:
            raise IterationCapExceeded(f"no proposal accepted within {max_iter} draws")
        need = trials - len(seeds)
        seeds.extend(gaps[:need].tolist())
        samples.extend(z[hits[:need]].tolist())
        if hits.size >= need:
            total -= chunk - 1 - hits[need - 1]
        carry = chunk - 1 - hits[-1]
    return np.asarray(samples), np.asarray(seeds, dtype=np.int64), total


@dataclass
class SeedReport:
    kl: float
    c: float
    trials: int
    mean_log_seed: float
    log_seed_se: float
    bound: float
    passed: bool
    acceptance_rate: float
    acceptance_sigma: float
    acceptance_bound: float
    acceptance_passed: bool
    tv_distance: float = float("nan")

    def to_dict(self):
        d = asdict(self)
        d["pass"] = bool(self.passed and self.acceptance_passed)
        return d


def histogram_tv(samples, target, bins=40):
    """Total-variation distance between the empirical histogram and a Gaussian target.

    Bins cover mu +/- 4 sigma, plus one bin for each tail.
    """
    edges = np.linspace(target.mu - 4 * target.sigma, target.mu + 4 * target.sigma, bins + 1)
    full = np.concatenate(([-np.inf], edges, [np.inf]))
    counts = np.histogram(samples, bins=full)[0]
    cdf = np.concatenate(([0.0], target.cdf(edges), [1.0]))
    expect = np.diff(cdf)
    return 0.5 * float(np.abs(counts / len(samples) - expect).sum())


def verify_seed_bound(dp, trials, rng, tv_bins=40):
    samples, seeds, n_prop = run_trials(dp, trials, rng)
    kl = dp.kl()
    logs = np.log(seeds)
    mean = float(logs.mean())
    se = float(logs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    bound = seed_length_bound(kl, dp.c)
    rate = trials / n_prop
    sigma = math.sqrt(rate * (1 - rate) / n_prop)
    a_bound = acceptance_lower_bound(kl, dp.c)
    tv = histogram_tv(samples, dp.target, tv_bins) if isinstance(dp.target, Gaussian) else float("nan")
    return SeedReport(
        kl=kl, c=dp.c, trials=trials,
        mean_log_seed=mean, log_seed_se=se, bound=bound, passed=mean <= bound + 3 * se,
        acceptance_rate=rate, acceptance_sigma=sigma, acceptance_bound=a_bound,
        acceptance_passed=rate >= a_bound - 3 * sigma, tv_distance=tv,
    ), seeds
