"""Simulation study: generating regimes crossed with analysis methods."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import Direction, InterventionKind, InterventionScheme, TimeCourseDataset
from .errors import CDBNError, DataError
from .evaluate import RocCurve, paired_t_test, roc_edges, roc_edges_pooled
from .inference import infer_network
from .simulate import SimulationConfig, default_topology, sample_coefficients, simulate_dataset, substream

logger = logging.getLogger(__name__)

REGIMES = {
    "perfect": InterventionKind.PERFECT,
    "fixed": InterventionKind.FIXED_EFFECT,
    "perfect-fixed": InterventionKind.PERFECT_FIXED_EFFECT,
    "mechanism": InterventionKind.MECHANISM_CHANGE,
}
METHODS = ("perfect", "fixed", "perfect-fixed", "mechanism", "none", "correlations")


def correlation_scores(data: TimeCourseDataset) -> np.ndarray:
    """Absolute lag-1 Pearson correlations, pooled over conditions.

    Entry ``(i, j)`` correlates ``x[i, c, t-1]`` with ``x[j, c, t]`` over
    all conditions and ``t > 0``.
    """
    prev = data.values[:, :, :-1].reshape(data.p, -1)
    curr = data.values[:, :, 1:].reshape(data.p, -1)
    prev = prev - prev.mean(axis=1, keepdims=True)
    curr = curr - curr.mean(axis=1, keepdims=True)
    num = prev @ curr.T
    den = np.outer(np.linalg.norm(prev, axis=1), np.linalg.norm(curr, axis=1))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(den > 0, num / den, 0.0)
    return np.clip(np.abs(r), 0.0, 1.0)


def method_scores(method: str, data, design, m: int) -> np.ndarray:
    if method == "correlations":
        return correlation_scores(data)
    kind = InterventionKind.NONE if method == "none" else REGIMES[method]
    probs, _ = infer_network(data, design.with_scheme(InterventionScheme(kind, Direction.OUT)), None, m)
    return probs


@dataclass
class StudyResult:
    regimes: list[str]
    methods: list[str]
    auc: dict = field(default_factory=dict)  # (regime, method) -> list of per-replicate AUC
    scores: dict = field(default_factory=dict)  # (regime, method) -> list of score matrices
    truths: dict = field(default_factory=dict)  # regime -> list of true adjacency
    failures: list = field(default_factory=list)

    def mean_auc(self) -> dict:
        return {k: float(np.mean(v)) if v else float("nan") for k, v in self.auc.items()}

    def pooled_roc(self, regime: str, method: str) -> RocCurve:
        pairs = list(zip(self.scores[(regime, method)], self.truths[regime]))
        return roc_edges_pooled(pairs)

    def best_method(self, regime: str, alpha: float = 0.05):
        """Methods whose mean AUC is highest or not significantly below the highest."""
        means = {m: np.mean(self.auc[(regime, m)]) for m in self.methods}
        best = max(means, key=means.get)
        tied = {best}
        for m in self.methods:
            if m == best:
                continue
            a, b = self.auc[(regime, best)], self.auc[(regime, m)]
            try:
                if paired_t_test(a, b) > alpha:
                    tied.add(m)
            except CDBNError:
                tied.add(m)
        return best, tied


def _replicate(task):
    regime, r, methods, m, seed, sigma, shift, T, names, topology = task
    cfg = SimulationConfig(T=T, kind=REGIMES[regime], shift=shift, seed=seed)
    wg = sample_coefficients(topology, substream(seed, regime, "coefficients", r), names, sigma)
    data, design = simulate_dataset(wg, cfg, replicate=_replicate_key(regime, r))
    out = {}
    for method in methods:
        try:
            out[method] = method_scores(method, data, design, m)
        except CDBNError as exc:
            out[method] = exc
    return regime, r, topology, out


def _replicate_key(regime: str, r: int) -> int:
    return list(REGIMES).index(regime) * 1_000_003 + r


def run_study(
    regimes=tuple(REGIMES),
    methods=METHODS,
    replicates: int = 20,
    seed: int = 0,
    m: int = 3,
    sigma: float = 0.5,
    shift: float = -1.0,
    T: int = 8,
    topology: np.ndarray | None = None,
    node_names=None,
    workers: int = 1,
) -> StudyResult:
    """Simulate ``replicates`` datasets per regime and score every method on each.

    Each replicate draws fresh coefficients on the fixed topology. If any
    method fails on a replicate, the failure is recorded in ``failures`` and
    the whole replicate is dropped so that every method is compared on the
    same set of datasets.
    """
    regimes, methods = list(regimes), list(methods)
    for reg in regimes:
        if reg not in REGIMES:
            raise DataError(f"unknown regime {reg!r}; choose from {sorted(REGIMES)}")
    for meth in methods:
        if meth not in METHODS:
            raise DataError(f"unknown method {meth!r}; choose from {list(METHODS)}")
    if topology is None:
        node_names, topology = default_topology()
    topology = np.asarray(topology, dtype=bool)
    if node_names is None:
        node_names = tuple(f"X{i + 1}" for i in range(topology.shape[0]))
    if "A" not in node_names or "B" not in node_names:
        raise DataError("study topology must contain the inhibited nodes 'A' and 'B'")

    tasks = [
        (reg, r, methods, m, seed, sigma, shift, T, tuple(node_names), topology)
        for reg in regimes
        for r in range(replicates)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, tasks))
    else:
        results = [_replicate(t) for t in tasks]

    res = StudyResult(regimes, methods)
    for reg in regimes:
        res.truths[reg] = []
        for meth in methods:
            res.auc[(reg, meth)] = []
            res.scores[(reg, meth)] = []
    for reg, r, truth, out in results:
        failed = [meth for meth, v in out.items() if isinstance(v, Exception)]
        for meth in failed:
            res.failures.append((reg, r, meth, str(out[meth])))
            logger.warning("regime %s replicate %d method %s failed: %s", reg, r, meth, out[meth])
        if failed:
            continue
        res.truths[reg].append(truth)
        for meth in methods:
            res.scores[(reg, meth)].append(out[meth])
            res.auc[(reg, meth)].append(roc_edges(out[meth], truth).auc)
    return res
