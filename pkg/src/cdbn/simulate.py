"""Synthetic interventional time courses from a known weighted graph.

Random streams come from Philox generators keyed by ``(seed, *names)`` so a
replicate's data do not depend on how many other replicates were drawn or
in what order.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data import (
    Direction,
    InterventionDesign,
    InterventionKind,
    InterventionScheme,
    TimeCourseDataset,
)
from .errors import DataError

__all__ = [
    "DEFAULT_CONDITIONS",
    "DEFAULT_EDGES",
    "DEFAULT_NODES",
    "SimulationConfig",
    "WeightedGraph",
    "default_topology",
    "sample_coefficients",
    "simulate_dataset",
    "simulate_replicates",
    "substream",
]

DEFAULT_NODES = tuple("ABCDEFGHIJKLMNO")

# Layered cascade from the two inhibited nodes A and B: diamonds and
# feed-forward triangles, a long feedback cycle O -> A, a cross link K -> B
# and seven self-edges; 31 edges. F has four parents, one more than the
# default in-degree bound, so its generating model lies outside the space.
DEFAULT_EDGES = (
    ("A", "C"), ("A", "D"), ("B", "D"), ("B", "E"), ("C", "F"), ("D", "F"),
    ("A", "F"), ("D", "G"), ("E", "G"), ("F", "H"), ("G", "H"), ("F", "I"),
    ("G", "I"), ("H", "J"), ("I", "J"), ("H", "K"), ("I", "K"), ("J", "L"),
    ("K", "L"), ("L", "M"), ("M", "N"), ("N", "O"), ("O", "A"), ("K", "B"),
    ("A", "A"), ("B", "B"), ("F", "F"), ("G", "G"), ("J", "J"), ("L", "L"),
    ("N", "N"),
)

DEFAULT_CONDITIONS = (
    ("none", frozenset()),
    ("A", frozenset({"A"})),
    ("B", frozenset({"B"})),
    ("A+B", frozenset({"A", "B"})),
)


def default_topology() -> tuple[tuple[str, ...], np.ndarray]:
    index = {name: i for i, name in enumerate(DEFAULT_NODES)}
    adj = np.zeros((len(DEFAULT_NODES), len(DEFAULT_NODES)), dtype=bool)
    for parent, child in DEFAULT_EDGES:
        adj[index[parent], index[child]] = True
    return DEFAULT_NODES, adj


def substream(seed: int, *names) -> np.random.Generator:
    """Independent generator for the named substream of ``seed``."""
    key = [int(seed) & 0xFFFFFFFF]
    for name in names:
        key.append(name if isinstance(name, int) else zlib.crc32(str(name).encode()))
    ss = np.random.SeedSequence(key)
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Coefficients ``coef[i, j]`` for edge ``i -> j`` plus per-node intercepts and noise."""

    node_names: tuple[str, ...]
    coef: np.ndarray
    intercept: np.ndarray
    intercept0: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        p = len(self.node_names)
        object.__setattr__(self, "node_names", tuple(self.node_names))
        for name, shape in (("coef", (p, p)), ("intercept", (p,)), ("intercept0", (p,)), ("sigma", (p,))):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise DataError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.sigma < 0):
            raise DataError("noise scales must be nonnegative")

    @property
    def p(self) -> int:
        return len(self.node_names)

    @property
    def topology(self) -> np.ndarray:
        return self.coef != 0


def _two_interval(rng: np.random.Generator, size) -> np.ndarray:
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return sign * rng.uniform(0.5, 1.0, size)


def sample_coefficients(
    topology: np.ndarray,
    seed=0,
    node_names: Sequence[str] | None = None,
    sigma: float = 0.5,
) -> WeightedGraph:
    """Draw edge weights uniformly from ``(-1, -0.5] U [0.5, 1)``.

    ``seed`` may be an integer or a ``numpy.random.Generator``. Intercepts
    are zero and every node gets noise scale ``sigma``.
    """
    topology = np.asarray(topology, dtype=bool)
    if topology.ndim != 2 or topology.shape[0] != topology.shape[1]:
        raise DataError(f"topology must be a square matrix, got shape {topology.shape}")
    p = topology.shape[0]
    rng = seed if isinstance(seed, np.random.Generator) else substream(seed, "coefficients")
    coef = np.zeros((p, p))
    coef[topology] = _two_interval(rng, int(topology.sum()))
    names = tuple(node_names) if node_names is not None else tuple(f"X{i + 1}" for i in range(p))
    return WeightedGraph(names, coef, np.zeros(p), np.zeros(p), np.full(p, float(sigma)))


@dataclass(frozen=True)
class SimulationConfig:
    """Layout and generating regime for simulated experiments.

    ``shift`` is the additive effect of an inhibitor on each child of its
    target; a mapping gives per-target values. ``alt_coef`` holds the
    coefficients used on edges out of inhibited nodes under mechanism
    change; when omitted they are drawn from the same two-interval law.
    ``shift_initial`` also applies fixed-effect shifts at ``t = 0``.
    """

    T: int = 8
    conditions: tuple = DEFAULT_CONDITIONS
    kind: InterventionKind = InterventionKind.NONE
    shift: float | Mapping[str, float] = -1.0
    alt_coef: np.ndarray | None = None
    shift_initial: bool = False
    seed: int = 0
    replicates: int = 1

    def __post_init__(self):
        if self.T < 2:
            raise DataError("need at least two time points")
        labels = [c for c, _ in self.conditions]
        if len(set(labels)) != len(labels):
            raise DataError("condition labels must be unique")
        conds = tuple((str(c), frozenset(t)) for c, t in self.conditions)
        object.__setattr__(self, "conditions", conds)

    def shift_for(self, target: str) -> float:
        if isinstance(self.shift, Mapping):
            return float(self.shift.get(target, 0.0))
        return float(self.shift)


def simulate_dataset(wg: WeightedGraph, cfg: SimulationConfig, replicate: int = 0):
    """Simulate one replicate; returns ``(dataset, design)``.

    The returned design carries the generating scheme in its "-out" form.
    Generation is the lag-1 recursion with noise; inhibition of node ``i`` in
    a condition removes (perfect), replaces (mechanism change) or keeps the
    coefficients on edges out of ``i``, and fixed-effect regimes add the
    configured shift to the children of ``i``.
    """
    kind = cfg.kind
    p, T = wg.p, cfg.T
    index = {name: i for i, name in enumerate(wg.node_names)}
    for label, targets in cfg.conditions:
        for name in targets:
            if name not in index:
                raise DataError(f"condition {label!r} targets unknown node {name!r}")

    alt = cfg.alt_coef
    if kind is InterventionKind.MECHANISM_CHANGE and alt is None:
        alt = np.zeros((p, p))
        topo = wg.topology
        alt[topo] = _two_interval(substream(cfg.seed, "mechanism", replicate), int(topo.sum()))
    rng = substream(cfg.seed, "noise", replicate)
    noise = rng.standard_normal((len(cfg.conditions), T, p))

    values = np.empty((p, len(cfg.conditions), T))
    for c, (_, targets) in enumerate(cfg.conditions):
        B = wg.coef.copy()
        shift = np.zeros(p)
        for name in targets:
            i = index[name]
            children = wg.coef[i] != 0
            if kind.zeroes_columns:
                B[i] = 0.0
            elif kind.splits_columns:
                B[i] = np.where(children, alt[i], 0.0)
            if kind.adds_fixed_effect:
                shift[children] += cfg.shift_for(name)
        x = wg.intercept0 + wg.sigma * noise[c, 0]
        if cfg.shift_initial:
            x = x + shift
        values[:, c, 0] = x
        for t in range(1, T):
            x = wg.intercept + x @ B + shift + wg.sigma * noise[c, t]
            values[:, c, t] = x

    data = TimeCourseDataset(
        wg.node_names, [c for c, _ in cfg.conditions], [float(t) for t in range(T)], values
    )
    design = InterventionDesign(
        {c: targets for c, targets in cfg.conditions}, InterventionScheme(kind, Direction.OUT)
    )
    return data, design


def simulate_replicates(topology: np.ndarray, node_names, cfg: SimulationConfig, sigma: float = 0.5):
    """Yield ``(graph, dataset, design)`` for each replicate, each with fresh coefficients."""
    for r in range(cfg.replicates):
        wg = sample_coefficients(topology, substream(cfg.seed, "coefficients", r), node_names, sigma)
        data, design = simulate_dataset(wg, cfg, r)
        yield wg, data, design
