import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammaln

from cdbn import _kernels
from cdbn.data import InterventionDesign, NetworkPrior
from cdbn.design import ColumnBank, DesignPair, ParentSet, RANK_RTOL, fixed_design, orthogonalize
from cdbn.errors import DataError, LikelihoodError
from cdbn.likelihood import (
    log_binomial,
    log_marginal_from_quadratic,
    log_marginal_likelihood,
    log_model_prior,
    score_model,
)

from conftest import make_dataset, make_design


def oracle(X0, Xg, x):
    """Explicit-inverse evaluation with g = n."""
    n, a = X0.shape
    b = Xg.shape[1]
    g = n
    P0 = X0 @ np.linalg.inv(X0.T @ X0) @ X0.T
    Pg = Xg @ np.linalg.inv(Xg.T @ Xg) @ Xg.T if b else np.zeros((n, n))
    quad = x @ (np.eye(n) - P0 - g / (g + 1) * Pg) @ x
    logK = gammaln((n - a) / 2) - np.log(2) - (n - a) / 2 * np.log(np.pi) - np.log(np.linalg.det(X0.T @ X0))
    return logK - b / 2 * np.log(n + 1) - (n - a) / 2 * np.log(quad)


def random_pair(rng, n, b):
    T = int(rng.integers(2, 5))
    C = max(1, n // T)
    data = make_dataset(p=1, C=C, T=T, seed=int(rng.integers(1 << 30)))
    X0 = fixed_design(data)
    Xg = orthogonalize(X0, rng.normal(size=(data.n, b)) * rng.uniform(0.1, 10, size=b))
    x = rng.normal(size=data.n) * 3 + 1
    return DesignPair(X0, Xg, x, ())


def test_hand_case_n6_a2_b1():
    data = make_dataset(p=2, C=2, T=3, seed=0)
    dp = ColumnBank(data, InterventionDesign({}), 1).design_for(ParentSet(1, (0,)))
    assert (dp.n, dp.a, dp.b) == (6, 2, 1)
    want = oracle(dp.X0, dp.Xgamma, dp.response)
    assert abs(log_marginal_likelihood(dp) - want) < 1e-10
    assert abs(log_marginal_likelihood(dp, method="projection") - want) < 1e-10


def test_empty_model_formula():
    data = make_dataset(p=1, C=3, T=4, seed=2)
    x = data.response(0)
    X0 = fixed_design(data)
    dp = DesignPair(X0, np.zeros((12, 0)), x, ())
    n, a = 12, 2
    first = data.initial_rows()
    rss = sum(float(np.sum((x[m] - x[m].mean()) ** 2)) for m in (first, ~first))
    logdet = math.log(first.sum() * (~first).sum())
    want = math.lgamma(5) - math.log(2) - 5 * math.log(math.pi) - logdet - 5 * math.log(rss)
    assert abs(log_marginal_likelihood(dp) - want) < 1e-10


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(4, 12), st.integers(1, 3))
def test_bayes_factor_against_r_squared_form(seed, n, b):
    # Bayes factor against the empty model in R^2 form: (1+g)^{(n-a-b)/2} (1+g(1-R^2))^{-(n-a)/2}
    rng = np.random.default_rng(seed)
    dp = random_pair(rng, n, b)
    n, a, b = dp.n, dp.a, dp.b
    if n <= a + b:
        return
    empty = DesignPair(dp.X0, dp.Xgamma[:, :0], dp.response, ())
    x = dp.response
    xp = x - dp.X0 @ np.linalg.lstsq(dp.X0, x, rcond=None)[0]
    fit = dp.Xgamma @ np.linalg.lstsq(dp.Xgamma, x, rcond=None)[0]
    r2 = (fit @ fit) / (xp @ xp)
    g = n
    want = (n - a - b) / 2 * math.log1p(g) - (n - a) / 2 * math.log(1 + g * (1 - r2))
    got = log_marginal_likelihood(dp) - log_marginal_likelihood(empty)
    assert abs(got - want) < 1e-9


def test_column_rescaling_invariance():
    rng = np.random.default_rng(1)
    for _ in range(20):
        dp = random_pair(rng, 12, 3)
        base = log_marginal_likelihood(dp)
        for k in range(dp.b):
            Xs = dp.Xgamma.copy()
            Xs[:, k] *= 1e3
            assert abs(log_marginal_likelihood(DesignPair(dp.X0, Xs, dp.response, ())) - base) < 1e-8


def test_mixing_invariance():
    rng = np.random.default_rng(2)
    for _ in range(20):
        dp = random_pair(rng, 12, 3)
        A = rng.normal(size=(3, 3)) + 3 * np.eye(3)
        mixed = DesignPair(dp.X0, dp.Xgamma @ A, dp.response, ())
        assert abs(log_marginal_likelihood(mixed) - log_marginal_likelihood(dp)) < 1e-8


def test_nested_explained_monotone_exact():
    # appending a column to a model never lowers x'Pg x (Cholesky prefix is shared)
    rng = np.random.default_rng(3)
    for backend in ("python", "numpy", "numba"):
        for _ in range(20):
            X = rng.normal(size=(16, 5))
            x = rng.normal(size=16)
            G, c, raw_sq = X.T @ X, X.T @ x, np.sum(X * X, axis=0)
            cols = np.array([[0, -1, -1], [0, 1, -1], [0, 1, 2], [3, -1, -1], [3, 4, -1]])
            widths = np.array([1, 2, 3, 1, 2])
            ex, status, _, _ = _kernels.score_models(G, c, raw_sq, cols, widths, RANK_RTOL, backend)
            assert np.all(status == 0)
            assert ex[0] <= ex[1] <= ex[2] and ex[3] <= ex[4]


def test_degenerate_designs_rejected():
    data = make_dataset(p=1, C=1, T=4, seed=0)
    X0 = fixed_design(data)
    x = data.response(0)
    Xg = orthogonalize(X0, np.random.default_rng(0).normal(size=(4, 2)))
    with pytest.raises(LikelihoodError, match="n > a"):
        log_marginal_likelihood(DesignPair(X0, Xg, x, ()))
    # response in span(X0): x'(I-P0)x = 0 and the quadratic form vanishes
    with pytest.raises(LikelihoodError, match="not positive"):
        log_marginal_likelihood(DesignPair(X0, Xg[:, :1], X0 @ [1.0, 2.0], ()))
    # an exact fit through Xg keeps the form positive thanks to the n/(n+1) shrinkage
    x_fit = X0 @ [1.0, 2.0] + 3.0 * Xg[:, 0]
    assert np.isfinite(log_marginal_likelihood(DesignPair(X0, Xg[:, :1], x_fit, ())))


def test_vectorized_matches_scalar():
    rng = np.random.default_rng(4)
    dp = random_pair(rng, 12, 2)
    x = dp.response
    xp = x - dp.X0 @ np.linalg.lstsq(dp.X0, x, rcond=None)[0]
    fit = dp.Xgamma @ np.linalg.lstsq(dp.Xgamma, x, rcond=None)[0]
    logdet = np.linalg.slogdet(dp.X0.T @ dp.X0)[1]
    vec = log_marginal_from_quadratic(dp.n, 2, np.array([0, 2]), xp @ xp, np.array([0.0, fit @ fit]), logdet)
    assert abs(vec[1] - log_marginal_likelihood(dp)) < 1e-10


def test_unknown_method():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        log_marginal_likelihood(random_pair(rng, 12, 1), method="svd")


def test_prior_multiplicity_ratio():
    for i in range(3):
        ratio = math.exp(log_model_prior(ParentSet(0, (i,)), None, 3, 3) - log_model_prior(ParentSet(0, ()), None, 3, 3))
        assert abs(ratio - 1 / 3) < 1e-15


def test_prior_penalty_examples():
    p = 10
    g0 = np.zeros((p, p), dtype=bool)
    g0[1, 0] = True  # prior parent B of node A
    prior = NetworkPrior(g0, 4.0)
    assert log_model_prior(ParentSet(0, (2,)), prior, p, 3) == pytest.approx(-math.log(p) - 8, abs=1e-12)
    assert log_model_prior(ParentSet(0, (1,)), prior, p, 3) == pytest.approx(-math.log(p), abs=1e-12)
    assert log_model_prior(ParentSet(0, ()), prior, p, 3) == pytest.approx(-4.0, abs=1e-12)
    assert log_model_prior(ParentSet(0, (1,)), NetworkPrior(g0, 0.0), p, 3) == log_model_prior(ParentSet(0, (1,)), None, p, 3)
    with pytest.raises(DataError):
        log_model_prior(ParentSet(0, (1, 2)), None, p, 1)


def test_prior_depends_on_size_and_symmetric_difference_only():
    p = 6
    rng = np.random.default_rng(0)
    g0 = rng.random((p, p)) < 0.3
    prior = NetworkPrior(g0, 1.7)
    parents0 = set(np.flatnonzero(g0[:, 2]).tolist())
    for _ in range(50):
        s = tuple(sorted(rng.choice(p, size=rng.integers(0, 4), replace=False).tolist()))
        want = -log_binomial(p, len(s)) - 1.7 * len(set(s) ^ parents0)
        assert log_model_prior(ParentSet(2, s), prior, p, 3) == pytest.approx(want, abs=1e-12)


def test_log_binomial():
    assert log_binomial(15, 3) == pytest.approx(math.log(455), abs=1e-12)
    assert log_binomial(7, 0) == 0.0


def test_score_model_combines_terms():
    data = make_dataset(p=3, C=2, T=5, seed=8)
    dp = ColumnBank(data, make_design({"c1": ["N0"]}, "perfect-fixed"), 2).design_for(ParentSet(2, (0, 1)))
    s = score_model(dp, None, 3, 2)
    assert s.log_posterior_unnorm == s.log_marginal + s.log_prior
    assert s.log_prior == pytest.approx(-math.log(3))
