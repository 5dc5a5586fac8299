"""Dataset runs: solve many puzzles, persist results, score pass@k, diagnostics."""
from __future__ import annotations

import json
import logging
import os
import tempfile
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .puzzle import Grid, PuzzleFormatError, load_puzzle
from .solver import SolverConfig, attempts_to_json, solve_puzzle

log = logging.getLogger(__name__)

OUT_ENV = "MDLARC_OUT"
PASS_KS = (1, 2)


def default_out_root():
    return Path(os.environ.get(OUT_ENV, "runs"))


def _cells(g):
    if isinstance(g, Grid):
        return g.cells
    return np.asarray(g)


def score_answer(attempt, truth):
    """Exact match: same shape and every pixel equal."""
    a, t = _cells(attempt), _cells(truth)
    return a.shape == t.shape and bool(np.array_equal(a, t))


def score_puzzle(attempts_json, truths, k):
    """Fraction of test pairs for which one of the first k attempts is exact."""
    if not truths:
        return 0.0
    hits = 0
    for t, truth in enumerate(truths):
        if t >= len(attempts_json):
            continue
        entry = attempts_json[t]
        tries = [entry[f"attempt_{i + 1}"] for i in range(k) if f"attempt_{i + 1}" in entry]
        hits += any(score_answer(a, truth) for a in tries)
    return hits / len(truths)


# ---------------------------------------------------------------- manifests and tables

@dataclass
class RunManifest:
    dataset: Path
    split: str
    out: Path
    puzzle_ids: tuple = ()
    config: SolverConfig = field(default_factory=SolverConfig)
    parallel: int = 1
    trace: bool = False

    def __post_init__(self):
        self.dataset = Path(self.dataset)
        self.out = Path(self.out)
        if self.parallel < 1:
            raise ValueError("parallel must be at least 1")

    def puzzle_paths(self):
        root = self.dataset / self.split
        if not root.is_dir():
            raise FileNotFoundError(f"no split directory {root}")
        paths = sorted(root.glob("*.json"))
        if self.puzzle_ids:
            wanted = set(self.puzzle_ids)
            missing = wanted - {p.stem for p in paths}
            if missing:
                raise FileNotFoundError(f"puzzles not found: {sorted(missing)}")
            paths = [p for p in paths if p.stem in wanted]
        return paths


@dataclass
class ScoreTable:
    pass_at: dict                 # checkpoint ("final" or step) -> {k: accuracy}
    per_puzzle: dict              # puzzle id -> {k: score} at the final step
    seconds: float = 0.0
    failures: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "pass_at": {str(s): {str(k): v for k, v in d.items()} for s, d in self.pass_at.items()},
            "per_puzzle": {p: {str(k): v for k, v in d.items()} for p, d in self.per_puzzle.items()},
            "seconds": self.seconds,
            "failures": self.failures,
        }


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def _result_path(out, puzzle_id):
    return Path(out) / "results" / f"{puzzle_id}.json"


def _solve_one(path, cfg_dict, out, trace):
    path = Path(path)
    start = time.perf_counter()
    record = {"id": path.stem}
    try:
        p = load_puzzle(path)
        cfg = SolverConfig.from_mapping(cfg_dict)
        res = solve_puzzle(p, cfg)
        record.update(
            attempts=res.attempts_json(),
            checkpoints={str(s): attempts_to_json(a) for s, a in res.checkpoints.items()},
            skipped_steps=res.skipped_steps,
            n_params=res.n_params,
            error=None,
        )
        if trace:
            export_kl_trace(res.trace, Path(out) / "traces" / f"{p.id}.csv")
    except Exception:  # noqa: BLE001 - per-puzzle failures are recorded, the run continues
        record.update(attempts=[], checkpoints={}, error=traceback.format_exc())
    record["seconds"] = time.perf_counter() - start
    _atomic_write(_result_path(out, path.stem), json.dumps(record))
    return record


def run_dataset(m):
    """Solve every selected puzzle not already persisted under ``m.out``, then score."""
    paths = m.puzzle_paths()
    m.out.mkdir(parents=True, exist_ok=True)
    (m.out / "config.json").write_text(json.dumps(m.config.to_dict(), indent=1, default=str))
    todo = [p for p in paths if not _result_path(m.out, p.stem).exists()]
    log.info("%d puzzles selected, %d to solve", len(paths), len(todo))
    cfg_dict = m.config.to_dict()
    if m.parallel == 1 or len(todo) <= 1:
        for p in todo:
            _solve_one(p, cfg_dict, m.out, m.trace)
    else:
        with ProcessPoolExecutor(max_workers=m.parallel) as pool:
            futures = [pool.submit(_solve_one, p, cfg_dict, m.out, m.trace) for p in todo]
            for f in futures:
                f.result()
    return collect_scores(m.out, paths)


def collect_scores(out, paths):
    """Score persisted results against the withheld test outputs of each puzzle file."""
    records, truths = {}, {}
    for p in paths:
        records[p.stem] = json.loads(_result_path(out, p.stem).read_text())
        try:
            truths[p.stem] = list(load_puzzle(p).withheld)
        except PuzzleFormatError:
            truths[p.stem] = []
    table = score_records(records, truths)
    submission = {pid: r["attempts"] for pid, r in records.items()}
    _atomic_write(Path(out) / "submission.json", json.dumps(submission))
    _atomic_write(Path(out) / "scores.json", json.dumps(table.to_dict(), indent=1))
    return table


def score_records(records, truths, ks=PASS_KS):
    per_puzzle, failures = {}, {}
    steps = sorted({int(s) for r in records.values() for s in r.get("checkpoints", {})})
    pass_at = {"final": {}}
    for s in steps:
        pass_at[s] = {}
    n = max(len(records), 1)
    for k in ks:
        pass_at["final"][k] = 0.0
        for s in steps:
            pass_at[s][k] = 0.0
    for pid, r in records.items():
        if r.get("error"):
            failures[pid] = r["error"].strip().splitlines()[-1]
        per_puzzle[pid] = {k: score_puzzle(r.get("attempts", []), truths[pid], k) for k in ks}
        for k in ks:
            pass_at["final"][k] += per_puzzle[pid][k] / n
            for s in steps:
                att = r.get("checkpoints", {}).get(str(s), [])
                pass_at[s][k] += score_puzzle(att, truths[pid], k) / n
    seconds = float(sum(r.get("seconds", 0.0) for r in records.values()))
    return ScoreTable(pass_at, per_puzzle, seconds, failures)


def score_submission(attempts_file, truth_dir):
    """Score a submission JSON against ``<truth_dir>/<id>.json`` files carrying test outputs."""
    sub = json.loads(Path(attempts_file).read_text())
    truths = {}
    for pid in sub:
        path = Path(truth_dir) / f"{pid}.json"
        truths[pid] = list(load_puzzle(path).withheld)
        if not truths[pid]:
            raise ValueError(f"{path} carries no test outputs")
    records = {pid: {"attempts": a} for pid, a in sub.items()}
    return score_records(records, truths)


# ---------------------------------------------------------------- diagnostics

def export_kl_trace(trace, path=None):
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
    return trace.to_csv(path)


@dataclass
class PCAResult:
    component: np.ndarray   # unit vector over channels
    heatmap: np.ndarray     # projection of every position onto the component
    ratio: float | None     # first over second singular value; None when undefined
    singular_values: np.ndarray


def pca_top_component(values):
    """Leading principal component of the channel vectors of one tensor (channel last).

    The component sign is fixed so its largest-magnitude entry is positive.
    """
    a = np.asarray(values, dtype=float)
    x = a.reshape(-1, a.shape[-1])
    x = x - x.mean(axis=0, keepdims=True)
    _, s, vt = np.linalg.svd(x, full_matrices=False)
    comp = vt[0]
    if comp[np.argmax(np.abs(comp))] < 0:
        comp = -comp
    if s[0] <= 1e-12 * max(1.0, np.abs(a).max()):
        return PCAResult(comp, np.zeros(a.shape[:-1]), None, s)
    ratio = float(s[0] / s[1]) if len(s) > 1 and s[1] > 0 else float("inf")
    return PCAResult(comp, (x @ comp).reshape(a.shape[:-1]), ratio, s)
