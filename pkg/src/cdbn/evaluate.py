"""ROC evaluation of edge probabilities against known structure.

Thresholds sweep every distinct score plus 0 and 1, predicting an edge when
its score is ``>= tau`` so tied scores enter together. AUC is the
trapezoidal area under the resulting staircase.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import TimeCourseDataset
from .errors import DataError, NumericalError

logger = logging.getLogger(__name__)

__all__ = [
    "RocCurve",
    "descendancy_sets",
    "descendants",
    "paired_t_test",
    "roc_descendancy",
    "roc_descendancy_pooled",
    "roc_edges",
    "roc_edges_pooled",
    "student_t_sf",
]


@dataclass(frozen=True, eq=False)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float
    half_point: tuple[float, float]
    positives: int
    negatives: int

    def rows(self):
        for f, t, tau in zip(self.fpr, self.tpr, self.thresholds):
            yield float(f), float(t), float(tau)


def _thresholds(values: Iterable[np.ndarray]) -> np.ndarray:
    vals = [np.asarray(v, dtype=np.float64).ravel() for v in values]
    taus = np.unique(np.concatenate(vals + [np.array([0.0, 1.0])]))
    return taus[::-1]


def _curve(taus, tp, fp, P, N, half_tp, half_fp) -> RocCurve:
    if P <= 0 or N <= 0:
        raise DataError(f"ROC undefined with {P} positives and {N} negatives")
    tpr = np.asarray(tp, dtype=np.float64) / P
    fpr = np.asarray(fp, dtype=np.float64) / N
    taus = np.asarray(taus, dtype=np.float64)
    if tpr[0] != 0.0 or fpr[0] != 0.0:
        tpr = np.concatenate([[0.0], tpr])
        fpr = np.concatenate([[0.0], fpr])
        taus = np.concatenate([[np.inf], taus])
    if tpr[-1] != 1.0 or fpr[-1] != 1.0:
        tpr = np.concatenate([tpr, [1.0]])
        fpr = np.concatenate([fpr, [1.0]])
        taus = np.concatenate([taus, [-np.inf]])
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr, tpr, taus, auc, (half_fp / N, half_tp / P), int(P), int(N))


def _edge_mask(shape, include_self: bool) -> np.ndarray:
    mask = np.ones(shape, dtype=bool)
    if not include_self:
        np.fill_diagonal(mask, False)
    return mask


def _edge_counts(probs, truth, include_self, taus):
    probs = np.asarray(probs, dtype=np.float64)
    truth = np.asarray(truth, dtype=bool)
    if probs.shape != truth.shape or probs.ndim != 2:
        raise DataError(f"score matrix {probs.shape} and truth {truth.shape} must be equal-shaped square matrices")
    mask = _edge_mask(probs.shape, include_self)
    pos = np.sort(probs[mask & truth])
    neg = np.sort(probs[mask & ~truth])
    tp = len(pos) - np.searchsorted(pos, taus, side="left")
    fp = len(neg) - np.searchsorted(neg, taus, side="left")
    half = (len(pos) - np.searchsorted(pos, 0.5, side="left"), len(neg) - np.searchsorted(neg, 0.5, side="left"))
    return tp, fp, len(pos), len(neg), half


def roc_edges(probs: np.ndarray, truth: np.ndarray, include_self: bool = True) -> RocCurve:
    """ROC of edge scores against a true adjacency matrix, over ordered pairs."""
    return roc_edges_pooled([(probs, truth)], include_self)


def roc_edges_pooled(instances: Sequence[tuple[np.ndarray, np.ndarray]], include_self: bool = True) -> RocCurve:
    """ROC with true/false positive counts summed across instances at a shared threshold grid."""
    if not instances:
        raise DataError("no instances to evaluate")
    taus = _thresholds(p for p, _ in instances)
    tp = np.zeros(len(taus))
    fp = np.zeros(len(taus))
    P = N = htp = hfp = 0
    for probs, truth in instances:
        a, b, npos, nneg, (h1, h2) = _edge_counts(probs, truth, include_self, taus)
        tp += a
        fp += b
        P += npos
        N += nneg
        htp += h1
        hfp += h2
    return _curve(taus, tp, fp, P, N, htp, hfp)


# ---------------------------------------------------------------------------
# Student t tail via the regularized incomplete beta function
# ---------------------------------------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, 10000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise NumericalError("incomplete beta continued fraction did not converge")


def regularized_beta(a: float, b: float, x: float) -> float:
    """``I_x(a, b)`` for ``a, b > 0`` and ``0 <= x <= 1``."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """Upper tail ``P(T > t)`` of Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    x = df / (df + t * t)
    tail = 0.5 * regularized_beta(0.5 * df, 0.5, x)
    return tail if t >= 0 else 1.0 - tail


def paired_t_test(x: Sequence[float], y: Sequence[float]) -> float:
    """Two-sided p-value of the paired t-test of ``x`` against ``y``.

    Raises
    ------
    DataError
        For unequal lengths or fewer than two pairs.
    NumericalError
        When the differences have zero variance.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("paired samples must be 1-d and of equal length")
    n = len(x)
    if n < 2:
        raise DataError("paired t-test needs at least two pairs")
    d = x - y
    sd = float(np.std(d, ddof=1))
    # roundoff leaves a constant difference with a tiny nonzero spread
    if not sd > 1e-14 * float(np.max(np.abs(d))):
        raise NumericalError("paired differences have zero variance")
    t = float(np.mean(d)) / (sd / math.sqrt(n))
    return min(1.0, 2.0 * student_t_sf(abs(t), n - 1))


def descendancy_sets(
    data: TimeCourseDataset,
    target: int | str,
    baseline_condition: str,
    inhibited_condition: str,
    alpha: float = 0.05,
) -> set[int]:
    """Nodes whose time course changes significantly under inhibition.

    Node ``k`` is included when the paired t-test over time-matched
    observations in the two conditions gives ``p <= alpha``. Nodes with
    zero-variance differences are skipped with a warning. The target itself
    is tested like any other node.
    """
    if isinstance(target, str):
        target = data.node_index(target)
    if not 0 <= target < data.p:
        raise DataError(f"target index {target} out of range")
    cb = data.condition_index(baseline_condition)
    ci = data.condition_index(inhibited_condition)
    out = set()
    for k in range(data.p):
        try:
            pval = paired_t_test(data.values[k, cb], data.values[k, ci])
        except NumericalError:
            logger.warning("node %s: degenerate paired differences, skipped", data.node_names[k])
            continue
        if pval <= alpha:
            out.add(k)
    return out


def descendants(adj: np.ndarray, source: int, mode: str = "descendants") -> np.ndarray:
    """Boolean mask of nodes reachable from ``source`` (itself excluded).

    ``mode="children"`` restricts to direct children.
    """
    adj = np.asarray(adj, dtype=bool)
    if mode == "children":
        reach = adj[source].copy()
    elif mode == "descendants":
        reach = adj[source].copy()
        frontier = reach.copy()
        while frontier.any():
            new = adj[frontier].any(axis=0) & ~reach
            reach |= new
            frontier = new
    else:
        raise ValueError(f"unknown mode {mode!r}")
    reach[source] = False
    return reach


def _desc_counts(probs, target, D, mode, taus):
    probs = np.asarray(probs, dtype=np.float64)
    p = probs.shape[0]
    if probs.shape != (p, p):
        raise DataError("edge probabilities must be square")
    truth = np.zeros(p, dtype=bool)
    truth[list(D)] = True
    truth[target] = False
    P = int(truth.sum())
    N = p - 1 - P
    tp = np.empty(len(taus))
    fp = np.empty(len(taus))
    for k, tau in enumerate(taus):
        found = descendants(probs >= tau, target, mode)
        tp[k] = np.count_nonzero(found & truth)
        fp[k] = np.count_nonzero(found & ~truth)
    half = descendants(probs >= 0.5, target, mode)
    return tp, fp, P, N, (np.count_nonzero(half & truth), np.count_nonzero(half & ~truth))


def roc_descendancy(probs: np.ndarray, target: int, D: Iterable[int], mode: str = "descendants") -> RocCurve:
    """ROC of inferred descendants (or children) of ``target`` against a reference set ``D``.

    The target is excluded from both the reference set and the candidates.
    """
    return roc_descendancy_pooled([(probs, target, D)], mode)


def roc_descendancy_pooled(instances, mode: str = "descendants") -> RocCurve:
    """Descendancy ROC with counts pooled across ``(probs, target, D)`` instances."""
    instances = [(np.asarray(p, dtype=np.float64), int(t), set(D)) for p, t, D in instances]
    if not instances:
        raise DataError("no instances to evaluate")
    taus = _thresholds(p for p, _, _ in instances)
    tp = np.zeros(len(taus))
    fp = np.zeros(len(taus))
    P = N = htp = hfp = 0
    for probs, target, D in instances:
        a, b, npos, nneg, (h1, h2) = _desc_counts(probs, target, D, mode, taus)
        tp += a
        fp += b
        P += npos
        N += nneg
        htp += h1
        hfp += h2
    return _curve(taus, tp, fp, P, N, htp, hfp)
