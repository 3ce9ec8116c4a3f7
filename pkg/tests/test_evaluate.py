from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from cdbn.data import InterventionKind, TimeCourseDataset
from cdbn.errors import DataError, NumericalError
from cdbn.evaluate import (
    descendancy_sets,
    descendants,
    paired_t_test,
    regularized_beta,
    roc_descendancy,
    roc_descendancy_pooled,
    roc_edges,
    roc_edges_pooled,
    student_t_sf,
)
from cdbn.simulate import SimulationConfig, WeightedGraph, simulate_dataset


def mann_whitney_auc(scores, truth):
    pos, neg = scores[truth], scores[~truth]
    u = stats.mannwhitneyu(pos, neg, alternative="two-sided").statistic
    return u / (len(pos) * len(neg))


def bfs(adj, s):
    seen = np.zeros(len(adj), dtype=bool)
    q = deque([s])
    while q:
        u = q.popleft()
        for v in np.flatnonzero(adj[u]):
            if not seen[v]:
                seen[v] = True
                q.append(v)
    seen[s] = False
    return seen


def test_perfect_and_uninformative():
    rng = np.random.default_rng(0)
    truth = rng.random((6, 6)) < 0.3
    assert roc_edges(truth.astype(float), truth).auc == 1.0
    assert roc_edges(np.full((6, 6), 0.5), truth).auc == 0.5


def test_curve_endpoints_and_half_point():
    truth = np.array([[True, False], [False, True]])
    probs = np.array([[0.9, 0.6], [0.2, 0.4]])
    c = roc_edges(probs, truth)
    assert (c.fpr[0], c.tpr[0]) == (0.0, 0.0) and (c.fpr[-1], c.tpr[-1]) == (1.0, 1.0)
    assert np.all(np.diff(c.fpr) >= 0) and np.all(np.diff(c.tpr) >= 0)
    assert c.half_point == (0.5, 0.5) and (c.positives, c.negatives) == (2, 2)
    assert c.auc == 0.75


@pytest.mark.parametrize("seed", range(20))
def test_auc_matches_mann_whitney(seed):
    rng = np.random.default_rng(seed)
    truth = rng.random((5, 5)) < 0.4
    truth[0, 0], truth[0, 1] = True, False
    probs = np.round(rng.random((5, 5)), 1)  # ties included
    assert abs(roc_edges(probs, truth).auc - mann_whitney_auc(probs.ravel(), truth.ravel())) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_auc_invariant_to_monotone_transform(seed):
    rng = np.random.default_rng(seed)
    truth = rng.random((6, 6)) < 0.3
    truth[0, 0], truth[0, 1] = True, False
    probs = rng.random((6, 6))
    base = roc_edges(probs, truth).auc
    for f in (np.sqrt, lambda v: v**3, lambda v: 0.2 + 0.5 * v):
        assert abs(roc_edges(f(probs), truth).auc - base) < 1e-12
    assert abs(base - mann_whitney_auc(probs.ravel(), truth.ravel())) < 1e-12


def test_exclude_self_edges():
    truth = np.eye(3, dtype=bool)
    truth[0, 1] = True
    probs = np.eye(3) * 0.1 + 0.5 * truth
    probs[0, 2] = 0.3
    c = roc_edges(probs, truth, include_self=False)
    assert (c.positives, c.negatives) == (1, 5) and c.auc == 1.0


def test_pooled_equals_stacked():
    rng = np.random.default_rng(3)
    inst = [(rng.random((4, 4)), rng.random((4, 4)) < 0.4) for _ in range(3)]
    pooled = roc_edges_pooled(inst)
    stacked = roc_edges(np.vstack([p for p, _ in inst]), np.vstack([t for _, t in inst]))
    assert pooled.auc == pytest.approx(stacked.auc, abs=1e-12)
    np.testing.assert_array_equal(pooled.tpr, stacked.tpr)


def test_roc_errors():
    with pytest.raises(DataError):
        roc_edges(np.zeros((2, 2)), np.zeros((2, 2), dtype=bool))
    with pytest.raises(DataError):
        roc_edges(np.zeros((2, 2)), np.zeros((3, 3), dtype=bool))
    with pytest.raises(DataError):
        roc_edges_pooled([])


def test_t_test_worked_example():
    x = np.array([2.0, 3.0, 4.0, 5.0, 5.0])
    y = x - np.array([1, 1, 1, 1, -1])
    # mean 0.6, sd sqrt(0.8): t = 1.5 on 4 degrees of freedom
    want = 2 * stats.t.sf(1.5, 4)
    assert abs(paired_t_test(x, y) - want) < 1e-12
    assert abs(paired_t_test(x, y) - stats.ttest_rel(x, y).pvalue) < 1e-12


@pytest.mark.parametrize("df", [1, 2, 3, 4, 7, 15, 30, 120])
def test_t_tail_against_reference(df):
    for t in np.linspace(-8, 8, 81):
        assert abs(student_t_sf(t, df) - stats.t.sf(t, df)) < 1e-12


def test_regularized_beta_against_reference():
    for a, b in [(0.5, 0.5), (2.0, 0.5), (15.0, 0.5), (3.0, 7.0)]:
        for x in (0.0, 1e-6, 0.1, 0.5, 0.9, 1.0):
            assert abs(regularized_beta(a, b, x) - stats.beta.cdf(x, a, b)) < 1e-12


def test_t_test_random_against_scipy():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = int(rng.integers(2, 30))
        x, y = rng.normal(size=n), rng.normal(size=n) + rng.normal() * 0.5
        assert abs(paired_t_test(x, y) - stats.ttest_rel(x, y).pvalue) < 1e-10


def test_t_test_degenerate_and_power():
    x = np.arange(6.0)
    with pytest.raises(NumericalError):
        paired_t_test(x, x)
    with pytest.raises(NumericalError):
        paired_t_test(x + 0.1, x)  # constant difference, spread is pure roundoff
    with pytest.raises(DataError):
        paired_t_test(x, x[:-1])
    with pytest.raises(DataError):
        paired_t_test([1.0], [2.0])
    rng = np.random.default_rng(0)
    y = rng.normal(size=8)
    assert paired_t_test(y + 10 + 0.1 * rng.normal(size=8), y) < 1e-6


def null_fpr(reps=2000, alpha=0.05, seed=0):
    p = 15
    wg = WeightedGraph([f"n{i}" for i in range(p)], np.zeros((p, p)), np.zeros(p), np.zeros(p), np.full(p, 0.5))
    hits = total = 0
    for r in range(reps):
        data, _ = simulate_dataset(wg, SimulationConfig(seed=seed, conditions=(("a", ()), ("b", ()))), r)
        hits += len(descendancy_sets(data, 0, "a", "b", alpha))
        total += p
    return hits / total


def test_t_test_false_positive_rate_calibrated():
    assert abs(null_fpr() - 0.05) <= 0.01


def detection_rates(shift, reps=100):
    names = ("hub", "child", "grand", "iso1", "iso2")
    coef = np.zeros((5, 5))
    coef[0, 1], coef[1, 2] = 0.8, 0.8
    wg = WeightedGraph(names, coef, np.zeros(5), np.zeros(5), np.full(5, 0.5))
    conds = (("ctl", ()), ("inh", ("hub",)))
    found = np.zeros(5)
    for r in range(reps):
        cfg = SimulationConfig(T=8, conditions=conds, kind=InterventionKind.FIXED_EFFECT, shift=shift, seed=r, shift_initial=True)
        data, _ = simulate_dataset(wg, cfg)
        for k in descendancy_sets(data, "hub", "ctl", "inh"):
            found[k] += 1
    return found / reps


def test_descendancy_sets_detect_children_of_hub():
    # autocorrelated time courses limit power at 2 sigma with T=8 (about 0.75 for the child)
    two = detection_rates(-1.0)
    assert two[1] >= 0.6 and two[1] > 5 * max(two[3], two[4])
    four = detection_rates(-2.0)
    assert four[1] >= 0.95 and four[2] >= 0.8
    assert max(four[3], four[4]) <= 0.15


def test_descendancy_alpha_one_and_degenerate_node(caplog):
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(3, 2, 5))
    vals[2, 1] = vals[2, 0]  # identical time courses: untestable
    data = TimeCourseDataset(["a", "b", "c"], ["x", "y"], range(5), vals)
    with caplog.at_level("WARNING"):
        assert descendancy_sets(data, "a", "x", "y", alpha=1.0) == {0, 1}
    assert "degenerate" in caplog.text
    with pytest.raises(DataError):
        descendancy_sets(data, 7, "x", "y")


def test_chain_descendants_vs_children():
    probs = np.zeros((4, 4))
    probs[0, 1] = 0.9
    probs[1, 2] = 0.8
    probs[3, 3] = 0.2
    assert roc_descendancy(probs, 0, {1, 2}).auc == 1.0
    children = roc_descendancy(probs, 0, {1, 2}, mode="children")
    assert children.auc < 1.0 and children.tpr[-2] == 0.5


def test_target_excluded():
    probs = np.zeros((3, 3))
    probs[0, 1] = probs[1, 0] = 0.9
    c = roc_descendancy(probs, 0, {0, 1})
    assert (c.positives, c.negatives) == (1, 1) and c.auc == 1.0


@pytest.mark.parametrize("seed", range(10))
def test_descendants_match_bfs_at_every_threshold(seed):
    rng = np.random.default_rng(seed)
    p = 10
    probs = np.where(rng.random((p, p)) < 0.25, rng.random((p, p)), 0.0)
    target = int(rng.integers(p))
    D = set(rng.choice(p, size=4, replace=False).tolist()) - {target} or {(target + 1) % p}
    taus = np.unique(np.concatenate([probs.ravel(), [0.0, 1.0]]))[::-1]
    truth = np.zeros(p, dtype=bool)
    truth[list(D)] = True
    prev = np.zeros(p, dtype=bool)
    tps, fps = [], []
    for tau in taus:
        adj = probs >= tau
        got = descendants(adj, target)
        want = bfs(adj, target)
        np.testing.assert_array_equal(got, want)
        assert np.all(got[prev])  # lowering tau never removes a descendant
        prev = got
        tps.append(np.count_nonzero(want & truth))
        fps.append(np.count_nonzero(want & ~truth))
    curve = roc_descendancy(probs, target, D)
    P, N = len(D), p - 1 - len(D)
    assert curve.positives == P and curve.negatives == N
    ours = set(zip(curve.fpr.tolist(), curve.tpr.tolist()))
    assert {(f / N, t / P) for f, t in zip(fps, tps)} <= ours


def test_pooled_descendancy_allows_empty_instance():
    probs = np.zeros((3, 3))
    probs[0, 1] = 0.9
    c = roc_descendancy_pooled([(probs, 0, {1}), (probs, 2, set())])
    assert (c.positives, c.negatives) == (1, 3)
    with pytest.raises(DataError):
        roc_descendancy(probs, 2, set())
    with pytest.raises(ValueError):
        descendants(probs > 0, 0, mode="ancestors")
