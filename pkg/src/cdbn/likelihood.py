"""Closed-form g-prior marginal likelihood and the structural model prior.

With improper priors on the intercepts and noise scale and a Zellner
g-prior (``g = n``) on the parent coefficients, the log marginal likelihood
of a design is

    log K - (b/2) log(n+1) - ((n-a)/2) log Q,
    Q = x'x - x'P0x - (n/(n+1)) x'Pg x,
    log K = lgamma((n-a)/2) - log 2 - ((n-a)/2) log(pi) - log|X0'X0|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import NetworkPrior
from .design import DesignPair, ParentSet
from .errors import DataError, LikelihoodError

__all__ = [
    "ModelScore",
    "QUAD_RTOL",
    "log_binomial",
    "log_marginal_from_quadratic",
    "log_marginal_likelihood",
    "log_model_prior",
    "log_normalizing_constant",
    "score_model",
]

# quadratic forms below QUAD_RTOL * x'x are treated as exact fits
QUAD_RTOL = 1e-12


@dataclass(frozen=True)
class ModelScore:
    log_marginal: float
    log_prior: float

    @property
    def log_posterior_unnorm(self) -> float:
        return self.log_marginal + self.log_prior


def log_normalizing_constant(n: int, a: int, logdet_x0: float) -> float:
    h = 0.5 * (n - a)
    return math.lgamma(h) - math.log(2.0) - h * math.log(math.pi) - logdet_x0


def log_marginal_from_quadratic(n, a, b, resid0, explained, logdet_x0, g=None):
    """Vectorized score from ``x'(I-P0)x`` and ``x'Pg x``.

    ``b`` and ``explained`` may be arrays; ``resid0`` and ``logdet_x0`` are
    shared by all models of one node.
    """
    g = float(n) if g is None else float(g)
    b = np.asarray(b, dtype=np.float64)
    quad = resid0 - (g / (g + 1.0)) * np.asarray(explained, dtype=np.float64)
    return (
        log_normalizing_constant(n, a, logdet_x0)
        - 0.5 * b * math.log1p(g)
        - 0.5 * (n - a) * np.log(quad)
    )


def log_marginal_likelihood(dp: DesignPair, method: str = "qr", g: float | None = None) -> float:
    """Log marginal likelihood of one design.

    ``method="qr"`` evaluates the quadratic forms from orthogonal
    decompositions; ``method="projection"`` forms ``P0`` and ``Pg``
    explicitly and is meant for cross-checking small problems.

    Raises
    ------
    LikelihoodError
        If ``n <= a + b`` or the residual quadratic form is not safely
        positive.
    """
    n, a, b = dp.n, dp.a, dp.b
    if n <= a + b:
        raise LikelihoodError(f"need n > a + b, got n={n}, a={a}, b={b}")
    g = float(n) if g is None else float(g)
    x = np.asarray(dp.response, dtype=np.float64)
    X0, Xg = dp.X0, dp.Xgamma
    xx = float(x @ x)

    if method == "qr":
        Q0, R0 = np.linalg.qr(X0)
        logdet = 2.0 * float(np.sum(np.log(np.abs(np.diag(R0)))))
        x_perp = x - Q0 @ (Q0.T @ x)
        resid0 = float(x_perp @ x_perp)
        if b:
            Qg = np.linalg.qr(Xg)[0]
            proj = Qg.T @ x
            explained = float(proj @ proj)
        else:
            explained = 0.0
    elif method == "projection":
        G0 = X0.T @ X0
        logdet = float(np.linalg.slogdet(G0)[1])
        P0 = X0 @ np.linalg.solve(G0, X0.T)
        resid0 = xx - float(x @ P0 @ x)
        if b:
            Pg = Xg @ np.linalg.solve(Xg.T @ Xg, Xg.T)
            explained = float(x @ Pg @ x)
        else:
            explained = 0.0
    else:
        raise ValueError(f"unknown method {method!r}")

    quad = resid0 - g / (g + 1.0) * explained
    if not quad > QUAD_RTOL * xx:
        raise LikelihoodError(f"residual quadratic form {quad:.3g} is not positive (x'x = {xx:.3g})")
    return float(log_marginal_from_quadratic(n, a, b, resid0, explained, logdet, g))


def log_binomial(p: int, k: int) -> float:
    return math.lgamma(p + 1) - math.lgamma(k + 1) - math.lgamma(p - k + 1)


def log_model_prior(pset: ParentSet, prior: NetworkPrior | None, p: int, m: int) -> float:
    """Unnormalized log prior: multiplicity correction plus prior-graph penalty."""
    k = len(pset.parents)
    if k > m:
        raise DataError(f"parent set of size {k} exceeds in-degree bound {m}")
    out = -log_binomial(p, k)
    if prior is not None and prior.lam > 0:
        prior_parents = prior.parents(pset.node)
        diff = len(set(pset.parents) ^ prior_parents)
        out -= prior.lam * diff
    return out


def score_model(dp: DesignPair, prior: NetworkPrior | None, p: int, m: int) -> ModelScore:
    return ModelScore(log_marginal_likelihood(dp), log_model_prior(dp.pset, prior, p, m))
