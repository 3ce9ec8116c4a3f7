"""Exact model averaging over bounded parent sets.

Each node is an independent variable-selection problem: all parent sets of
size at most ``m`` are scored, the posterior is normalized in log space and
edge probabilities are posterior inclusion probabilities. The cost per node
is ``sum_{k<=m} C(p, k)`` model scores, e.g. 1177 for ``p=48, m=2`` and 576
for ``p=15, m=3``.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .data import InterventionDesign, NetworkPrior, TimeCourseDataset
from .design import RANK_RTOL, ColumnBank, ParentSet
from .errors import DataError, InferenceError
from .likelihood import QUAD_RTOL, log_binomial, log_marginal_from_quadratic

logger = logging.getLogger(__name__)

__all__ = [
    "NodePosterior",
    "count_models",
    "edge_probabilities",
    "enumerate_parent_sets",
    "fitted_values",
    "infer_network",
    "infer_node",
    "threshold_network",
]


def count_models(p: int, m: int) -> int:
    return sum(math.comb(p, k) for k in range(min(m, p) + 1))


@lru_cache(maxsize=32)
def enumerate_parent_sets(p: int, m: int) -> tuple[tuple[int, ...], ...]:
    """All subsets of ``range(p)`` with at most ``m`` elements, in colex order."""
    if m < 0:
        raise DataError(f"in-degree bound must be nonnegative, got {m}")
    subsets = [s for k in range(min(m, p) + 1) for s in itertools.combinations(range(p), k)]
    # colex order is the order of the subsets' bitmasks
    subsets.sort(key=lambda s: sum(1 << i for i in s))
    return tuple(subsets)


@dataclass
class NodePosterior:
    """Normalized posterior over the parent sets of one node.

    ``parent_sets``, ``probs``, ``log_scores`` and ``log_marginals`` are
    aligned; excluded (degenerate) models are listed in ``excluded`` with
    the reason and carry no probability.
    """

    node: int
    parent_sets: list[tuple[int, ...]]
    probs: np.ndarray
    log_scores: np.ndarray
    log_marginals: np.ndarray
    log_evidence: float
    excluded: list[tuple[tuple[int, ...], str]] = field(default_factory=list)

    @property
    def models(self) -> list[tuple[ParentSet, float]]:
        return [(ParentSet(self.node, s), float(w)) for s, w in zip(self.parent_sets, self.probs)]

    def top(self, k: int = 10) -> list[int]:
        order = sorted(range(len(self.probs)), key=lambda i: (-self.probs[i], i))
        return order[:k]


def _model_columns(bank: ColumnBank, parent_sets):
    col_lists = [bank.columns_for(s) for s in parent_sets]
    widths = np.array([len(c) for c in col_lists], dtype=np.int64)
    W = int(widths.max(initial=0))
    cols = np.full((len(col_lists), W), -1, dtype=np.int64)
    for r, cl in enumerate(col_lists):
        cols[r, : len(cl)] = cl
    return cols, widths


def _score_bank(bank: ColumnBank, parent_sets, backend=None):
    cols, widths = _model_columns(bank, parent_sets)
    X = bank.X
    G = X.T @ X
    c = X.T @ bank.response
    explained, status, bad, coef = _kernels.score_models(G, c, bank.raw_sq, cols, widths, RANK_RTOL, backend)
    return cols, widths, explained, status, bad, coef


def _log_prior_terms(node: int, parent_sets, prior: NetworkPrior | None, p: int) -> np.ndarray:
    sizes = np.array([len(s) for s in parent_sets])
    log_mult = np.array([-log_binomial(p, k) for k in range(p + 1)])
    out = log_mult[sizes]
    if prior is not None and prior.lam > 0:
        prior_parents = prior.parents(node)
        diffs = np.array([len(set(s) ^ prior_parents) for s in parent_sets], dtype=np.float64)
        out = out - prior.lam * diffs
    return out


def infer_node(
    j: int,
    data: TimeCourseDataset,
    design: InterventionDesign,
    prior: NetworkPrior | None,
    m: int,
    backend: str | None = None,
) -> NodePosterior:
    """Posterior over parent sets of node ``j`` by exhaustive enumeration.

    Models whose design is rank deficient, that leave too few residual
    degrees of freedom, or whose residual quadratic form is not positive
    are excluded with a warning; the rest are renormalized.

    Raises
    ------
    InferenceError
        If every model is excluded.
    """
    p = data.p
    if not 0 <= m <= p:
        raise DataError(f"in-degree bound m={m} must lie in [0, p={p}]")
    if prior is not None and prior.prior_graph.shape != (p, p):
        raise DataError(f"prior graph shape {prior.prior_graph.shape} does not match p={p}")
    parent_sets = enumerate_parent_sets(p, m)
    bank = ColumnBank(data, design, j)
    cols, widths, explained, status, bad, _ = _score_bank(bank, parent_sets, backend)

    n, a = data.n, bank.X0.shape[1]
    x = bank.response
    xx = float(x @ x)
    x_perp = x - bank.X0 @ np.linalg.lstsq(bank.X0, x, rcond=None)[0]
    resid0 = float(x_perp @ x_perp)
    logdet = float(np.linalg.slogdet(bank.X0.T @ bank.X0)[1])

    g = float(n)
    quad = resid0 - g / (g + 1.0) * np.where(status == 0, explained, 0.0)
    ok = (status == 0) & (n > a + widths) & (quad > QUAD_RTOL * xx)

    excluded = []
    for r in np.flatnonzero(~ok):
        if status[r] != 0:
            tag = bank.tags[cols[r, bad[r]]].describe(data)
            what = "all-zero" if status[r] == _kernels.STATUS_ZERO else "linearly dependent"
            reason = f"rank deficient: {what} column {tag}"
        elif n <= a + widths[r]:
            reason = f"too few observations (n={n}, a={a}, b={widths[r]})"
        else:
            reason = "nonpositive residual quadratic form"
        excluded.append((parent_sets[r], reason))
    if excluded:
        logger.warning(
            "node %s: excluded %d of %d models (first: %s %s)",
            data.node_names[j], len(excluded), len(parent_sets), excluded[0][0], excluded[0][1],
        )
    if not ok.any():
        raise InferenceError(f"node {data.node_names[j]}: all {len(parent_sets)} models were excluded")

    keep = np.flatnonzero(ok)
    kept_sets = [parent_sets[r] for r in keep]
    log_ml = log_marginal_from_quadratic(n, a, widths[keep], resid0, explained[keep], logdet, g)
    log_scores = log_ml + _log_prior_terms(j, kept_sets, prior, p)
    top = float(np.max(log_scores))
    log_evidence = top + math.log(math.fsum(np.exp(log_scores - top)))
    probs = np.exp(log_scores - log_evidence)
    return NodePosterior(j, kept_sets, probs, log_scores, np.asarray(log_ml), log_evidence, excluded)


def edge_probabilities(posteriors, p: int | None = None) -> np.ndarray:
    """Posterior edge probabilities; entry ``(i, j)`` is ``P(i -> j | data)``."""
    p = len(posteriors) if p is None else p
    out = np.zeros((p, p))
    for post in posteriors:
        j = post.node
        for parents, w in zip(post.parent_sets, post.probs):
            for i in parents:
                out[i, j] += w
    return out


def fitted_values(posteriors, data: TimeCourseDataset, design: InterventionDesign, backend: str | None = None):
    """Model-averaged fitted values, shape ``(p, n_conditions, T)``.

    Each model contributes ``P0 x + (n/(n+1)) X_g beta_ls``, the fit at the
    posterior mean of the coefficients under the g-prior with ``g = n``.
    """
    n = data.n
    shrink = n / (n + 1.0)
    out = np.empty_like(data.values)
    for post in posteriors:
        bank = ColumnBank(data, design, post.node)
        cols, widths, _, status, _, coef = _score_bank(bank, post.parent_sets, backend)
        if np.any(status != 0):
            raise InferenceError(f"node {post.node}: posterior contains a degenerate model")
        x = bank.response
        base = bank.X0 @ np.linalg.lstsq(bank.X0, x, rcond=None)[0]
        beta_bank = np.zeros(bank.n_columns)
        for r in range(len(post.parent_sets)):
            b = widths[r]
            np.add.at(beta_bank, cols[r, :b], post.probs[r] * coef[r, :b])
        fit = base + shrink * (bank.X @ beta_bank)
        out[post.node] = fit.reshape(data.n_conditions, data.T)
    return out


def _infer_node_task(args):
    try:
        return infer_node(*args)
    except InferenceError as exc:
        return exc


def infer_network(
    data: TimeCourseDataset,
    design: InterventionDesign,
    prior: NetworkPrior | None,
    m: int,
    workers: int = 1,
    backend: str | None = None,
):
    """Infer every node; returns ``(edge_probs, posteriors)``.

    Nodes are scored independently, in a process pool when ``workers > 1``;
    results do not depend on the worker count.
    """
    tasks = [(j, data, design, prior, m, backend) for j in range(data.p)]
    if workers > 1 and data.p > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_infer_node_task, tasks))
    else:
        results = [_infer_node_task(t) for t in tasks]
    failures = [r for r in results if isinstance(r, InferenceError)]
    if failures:
        raise InferenceError("; ".join(str(f) for f in failures))
    posteriors = results
    return edge_probabilities(posteriors, data.p), posteriors


def threshold_network(probs: np.ndarray, tau: float = 0.5) -> np.ndarray:
    return np.asarray(probs) >= tau
