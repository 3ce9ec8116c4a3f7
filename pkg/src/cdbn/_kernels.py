"""Batched parent-set scoring kernels.

Each model is a list of bank columns. Given the bank Gram matrix ``G`` and
``c = X'x`` the explained sum of squares of a model is ``c_g' G_gg^-1 c_g``,
computed here via a Cholesky factorization of the model's Gram block. The
Cholesky pivots double as the rank check used by ``design._check_rank``.

Two interchangeable backends: a numba ``@njit`` loop and a pure-numpy path
vectorized over models of equal width. Set ``CDBN_NUMBA=0`` to force the
numpy path (it is also used when numba is not importable).
"""

from __future__ import annotations

import logging
import os

import numpy as np

logger = logging.getLogger(__name__)

STATUS_OK = 0
STATUS_ZERO = 1
STATUS_DEPENDENT = 2

try:
    import numba

    logging.getLogger("numba").setLevel(logging.WARNING)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _env_wants_numba() -> bool:
    return os.environ.get("CDBN_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


USE_NUMBA = HAVE_NUMBA and _env_wants_numba()


def default_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def _score_models_py(G, c, raw_sq, cols, widths, rtol):
    M, w = cols.shape
    explained = np.full(M, np.nan)
    status = np.zeros(M, dtype=np.int64)
    bad = np.full(M, -1, dtype=np.int64)
    coef = np.zeros((M, w))
    L = np.zeros((w, w))
    z = np.zeros(w)
    for mi in range(M):
        b = widths[mi]
        ok = True
        for k in range(b):
            ck = cols[mi, k]
            for l in range(k):
                s = G[ck, cols[mi, l]]
                for q in range(l):
                    s -= L[k, q] * L[l, q]
                L[k, l] = s / L[l, l]
            d = G[ck, ck]
            for q in range(k):
                d -= L[k, q] * L[k, q]
            scale = rtol * raw_sq[ck]
            if raw_sq[ck] == 0.0 or G[ck, ck] <= scale:
                status[mi] = STATUS_ZERO
                bad[mi] = k
                ok = False
                break
            if d <= scale:
                status[mi] = STATUS_DEPENDENT
                bad[mi] = k
                ok = False
                break
            L[k, k] = np.sqrt(d)
        if not ok:
            continue
        acc = 0.0
        for k in range(b):
            s = c[cols[mi, k]]
            for q in range(k):
                s -= L[k, q] * z[q]
            z[k] = s / L[k, k]
            acc += z[k] * z[k]
        explained[mi] = acc
        for k in range(b - 1, -1, -1):
            s = z[k]
            for q in range(k + 1, b):
                s -= L[q, k] * coef[mi, q]
            coef[mi, k] = s / L[k, k]
    return explained, status, bad, coef


if HAVE_NUMBA:
    _score_models_jit = numba.njit(cache=True, nogil=True)(_score_models_py)
else:  # pragma: no cover
    _score_models_jit = None


def _score_models_numpy(G, c, raw_sq, cols, widths, rtol):
    M, w = cols.shape
    explained = np.full(M, np.nan)
    status = np.zeros(M, dtype=np.int64)
    bad = np.full(M, -1, dtype=np.int64)
    coef = np.zeros((M, w))
    for b in np.unique(widths):
        rows = np.flatnonzero(widths == b)
        if b == 0:
            explained[rows] = 0.0
            continue
        idx = cols[rows, :b]
        Gs = G[idx[:, :, None], idx[:, None, :]]
        cs = c[idx]
        scale = rtol * raw_sq[idx]
        L = np.zeros_like(Gs)
        alive = np.ones(len(rows), dtype=bool)
        for k in range(b):
            for l in range(k):
                L[:, k, l] = (Gs[:, k, l] - np.einsum("mq,mq->m", L[:, k, :l], L[:, l, :l])) / L[:, l, l]
            d = Gs[:, k, k] - np.einsum("mq,mq->m", L[:, k, :k], L[:, k, :k])
            zero = alive & ((raw_sq[idx[:, k]] == 0.0) | (Gs[:, k, k] <= scale[:, k]))
            dep = alive & ~zero & (d <= scale[:, k])
            status[rows[zero]] = STATUS_ZERO
            status[rows[dep]] = STATUS_DEPENDENT
            bad[rows[zero | dep]] = k
            alive &= ~(zero | dep)
            # keep failed models numerically inert
            L[:, k, k] = np.sqrt(np.where(alive, d, 1.0))
        z = np.zeros((len(rows), b))
        for k in range(b):
            z[:, k] = (cs[:, k] - np.einsum("mq,mq->m", L[:, k, :k], z[:, :k])) / L[:, k, k]
        beta = np.zeros((len(rows), b))
        for k in range(b - 1, -1, -1):
            beta[:, k] = (z[:, k] - np.einsum("mq,mq->m", L[:, k + 1 :, k], beta[:, k + 1 :])) / L[:, k, k]
        ex = np.einsum("mk,mk->m", z, z)
        explained[rows[alive]] = ex[alive]
        coef[rows[alive], :b] = beta[alive]
    return explained, status, bad, coef


def score_models(G, c, raw_sq, cols, widths, rtol, backend: str | None = None):
    """Score a batch of models given as padded bank-column index rows.

    Returns ``(explained, status, bad, coef)``: the explained sum of
    squares ``x'Pg x`` (NaN for failed models), a status code per model,
    the position of the first offending column (``-1`` if none) and the
    least-squares coefficients ``(X_g'X_g)^-1 X_g'x`` padded with zeros.
    """
    backend = backend or default_backend()
    G = np.ascontiguousarray(G, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    raw_sq = np.ascontiguousarray(raw_sq, dtype=np.float64)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    widths = np.ascontiguousarray(widths, dtype=np.int64)
    if cols.ndim != 2:
        cols = cols.reshape(len(widths), -1)
    if backend == "numba":
        if _score_models_jit is None:
            raise RuntimeError("numba backend requested but numba is not installed")
        return _score_models_jit(G, c, raw_sq, cols, widths, float(rtol))
    if backend == "numpy":
        return _score_models_numpy(G, c, raw_sq, cols, widths, float(rtol))
    if backend == "python":
        return _score_models_py(G, c, raw_sq, cols, widths, float(rtol))
    raise ValueError(f"unknown backend {backend!r}")
