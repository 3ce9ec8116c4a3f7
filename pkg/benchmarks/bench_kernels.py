#!/usr/bin/env python3
"""Benchmark the parent-set scoring kernels: numba JIT vs vectorized numpy.

Usage:
    python benchmarks/bench_kernels.py [--p 15] [--m 3] [--repeat 5]

For one node of a simulated dataset it scores every parent set with
``|gamma| <= m`` through each backend, checks the backends agree, and
reports the best wall time of ``--repeat`` runs. The first numba call
(compilation or cache load) is timed separately. A full-network timing of
``infer_network`` under each backend follows.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cdbn import _kernels
from cdbn.data import InterventionKind
from cdbn.design import RANK_RTOL, ColumnBank
from cdbn.inference import _model_columns, enumerate_parent_sets, infer_network
from cdbn.simulate import SimulationConfig, default_topology, sample_coefficients, simulate_dataset


def _dataset(p: int, seed: int):
    names, topo = default_topology()
    if p != len(names):
        rng = np.random.default_rng(seed)
        topo = rng.random((p, p)) < 2.0 / p
        names = tuple(["A", "B"] + [f"N{i}" for i in range(2, p)])
    wg = sample_coefficients(topo, seed, names)
    cfg = SimulationConfig(kind=InterventionKind.PERFECT_FIXED_EFFECT, seed=seed)
    return simulate_dataset(wg, cfg)


def _best(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=15)
    ap.add_argument("--m", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--skip-network", action="store_true")
    args = ap.parse_args(argv)

    data, design = _dataset(args.p, args.seed)
    bank = ColumnBank(data, design, node=min(5, data.p - 1))
    psets = enumerate_parent_sets(data.p, args.m)
    cols, widths = _model_columns(bank, psets)
    G = bank.X.T @ bank.X
    c = bank.X.T @ bank.response
    call = (G, c, bank.raw_sq, cols, widths, RANK_RTOL)
    print(f"p={data.p} m={args.m} models={len(psets)} bank columns={bank.X.shape[1]} n={data.n}")

    results = {}
    if _kernels.HAVE_NUMBA:
        t0 = time.perf_counter()
        results["numba"] = _kernels.score_models(*call, backend="numba")
        print(f"numba first call (compile or cache load): {time.perf_counter() - t0:.3f} s")
    results["numpy"] = _kernels.score_models(*call, backend="numpy")

    ref = results["numpy"][0]
    for name, res in results.items():
        ok = np.isfinite(ref)
        diff = np.max(np.abs(res[0][ok] - ref[ok]) / np.maximum(1.0, np.abs(ref[ok])), initial=0.0)
        t = _best(lambda b=name: _kernels.score_models(*call, backend=b), args.repeat)
        print(f"{name:6s} kernel: {t * 1e3:9.3f} ms  ({len(psets) / t:,.0f} models/s)  max rel diff vs numpy {diff:.1e}")

    if args.skip_network:
        return
    for name in results:
        t = _best(lambda b=name: infer_network(data, design, None, args.m, backend=b), 1)
        print(f"{name:6s} infer_network over {data.p} nodes: {t:.3f} s")


if __name__ == "__main__":
    main()
