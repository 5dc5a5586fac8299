import numpy as np

from mdlarc import autodiff as ad


def numeric_grad(scalar, xs, i, h=1e-5, probe=None):
    x = xs[i].data
    flat = x.ravel()
    idx = range(flat.size) if probe is None else probe
    out = np.zeros(len(idx))
    for n, j in enumerate(idx):
        vals = []
        for v in (flat[j] + h, flat[j] - h):
            d = flat.copy()
            d[j] = v
            ts = [ad.const(a.data) for a in xs]
            ts[i] = ad.const(d.reshape(x.shape))
            vals.append(float(scalar(*ts).data))
        out[n] = (vals[0] - vals[1]) / (2 * h)
    return out


def gradcheck(fn, arrays, seed=0, h=1e-5, n_probe=None):
    """Relative error ||analytic - numeric|| / max(||analytic||, ||numeric||), worst input.

    The scalar checked is sum(fn(...) * R) with a fixed random R so every
    output element contributes.
    """
    rng = np.random.default_rng(seed)
    xs = [ad.param(np.array(a, dtype=float)) for a in arrays]
    weights = rng.standard_normal(fn(*[ad.const(x.data) for x in xs]).shape)

    def scalar(*ts):
        return ad.sum_reduce(ad.mul(fn(*ts), weights))

    ad.backward(scalar(*xs))
    worst = 0.0
    for i, x in enumerate(xs):
        analytic = np.zeros_like(x.data) if x.grad is None else x.grad
        probe = None
        if n_probe is not None and x.data.size > n_probe:
            probe = sorted(rng.choice(x.data.size, n_probe, replace=False))
        num = numeric_grad(scalar, xs, i, h, probe)
        a = analytic.ravel() if probe is None else analytic.ravel()[probe]
        scale = max(np.linalg.norm(a), np.linalg.norm(num), 1e-12)
        worst = max(worst, float(np.linalg.norm(a - num) / scale))
    return worst


import pytest


@pytest.fixture(scope="session")
def identity_run():
    """The identity toy solved for 500 steps at seed 0 (shared by several tests)."""
    from mdlarc.solver import SolverConfig, solve_puzzle
    from mdlarc.toys import toy_puzzle

    return solve_puzzle(toy_puzzle("identity"), SolverConfig(steps=500, seed=0))


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_record():
    return _ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
