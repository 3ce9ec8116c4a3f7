"""Time-course datasets, intervention designs and prior networks.

File formats
------------
Dataset (wide CSV)
    Header ``condition,time,<node1>,...,<nodep>``; one row per
    (condition, time) observation vector, which is exactly how the regression
    consumes the data.
Intervention design (JSON)
    Object mapping condition label to a list of inhibited node names.
Prior network / edge list (CSV)
    Header ``parent,child``; one directed edge per row, node names.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "Direction",
    "InterventionDesign",
    "InterventionKind",
    "InterventionScheme",
    "NetworkPrior",
    "TimeCourseDataset",
    "load_dataset",
    "load_edge_list",
    "load_intervention_design",
    "load_prior_network",
    "write_dataset",
    "write_edge_list",
    "write_intervention_design",
]


class InterventionKind(enum.Enum):
    NONE = "none"
    PERFECT = "perfect"
    FIXED_EFFECT = "fixed"
    MECHANISM_CHANGE = "mechanism"
    PERFECT_FIXED_EFFECT = "perfect-fixed"

    @property
    def zeroes_columns(self) -> bool:
        return self in (InterventionKind.PERFECT, InterventionKind.PERFECT_FIXED_EFFECT)

    @property
    def adds_fixed_effect(self) -> bool:
        return self in (InterventionKind.FIXED_EFFECT, InterventionKind.PERFECT_FIXED_EFFECT)

    @property
    def splits_columns(self) -> bool:
        return self is InterventionKind.MECHANISM_CHANGE


class Direction(enum.Enum):
    IN = "in"
    OUT = "out"


@dataclass(frozen=True)
class InterventionScheme:
    """Intervention model applied to inhibited conditions.

    Perfect and mechanism-change cannot be combined: there is no kind
    for it, because zeroing a column and then splitting it would leave an
    all-zero column in the design.
    """

    kind: InterventionKind = InterventionKind.NONE
    direction: Direction = Direction.OUT

    @classmethod
    def parse(cls, kind: str, direction: str = "out") -> "InterventionScheme":
        aliases = {
            "perfect-fixed-effect": "perfect-fixed",
            "fixed-effect": "fixed",
            "mechanism-change": "mechanism",
        }
        kind = aliases.get(kind.lower(), kind.lower())
        try:
            return cls(InterventionKind(kind), Direction(direction.lower()))
        except ValueError as exc:
            raise DataError(f"unknown intervention scheme {kind!r}/{direction!r}") from exc

    def __str__(self) -> str:
        if self.kind is InterventionKind.NONE:
            return "none"
        return f"{self.kind.value}-{self.direction.value}"


@dataclass(frozen=True, eq=False)
class TimeCourseDataset:
    """Log-expression values indexed as ``values[node, condition, time]``.

    Rows of the per-node regression are ordered condition-major, so the
    observation for (condition ``c``, time index ``t``) sits at row
    ``c * T + t``.
    """

    node_names: tuple[str, ...]
    conditions: tuple[str, ...]
    times: tuple[float, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "node_names", tuple(str(s) for s in self.node_names))
        object.__setattr__(self, "conditions", tuple(str(s) for s in self.conditions))
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        values = np.array(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

        p, C, T = len(self.node_names), len(self.conditions), len(self.times)
        if p < 1:
            raise DataError("dataset needs at least one node")
        if C < 1:
            raise DataError("dataset needs at least one condition")
        if T < 2:
            raise DataError("dataset needs at least two time points")
        if values.shape != (p, C, T):
            raise DataError(f"values have shape {values.shape}, expected {(p, C, T)}")
        _check_unique(self.node_names, "node name")
        _check_unique(self.conditions, "condition label")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise DataError("time stamps must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise DataError("dataset contains non-finite values")

    @property
    def p(self) -> int:
        return len(self.node_names)

    @property
    def T(self) -> int:
        return len(self.times)

    @property
    def n_conditions(self) -> int:
        return len(self.conditions)

    @property
    def n(self) -> int:
        return self.T * self.n_conditions

    def node_index(self, name: str) -> int:
        try:
            return self.node_names.index(name)
        except ValueError:
            raise DataError(f"unknown node name {name!r}") from None

    def condition_index(self, label: str) -> int:
        try:
            return self.conditions.index(label)
        except ValueError:
            raise DataError(f"unknown condition label {label!r}") from None

    def response(self, j: int) -> np.ndarray:
        """Stacked observations of node ``j``, length ``n``."""
        return self.values[j].reshape(-1)

    def lagged(self) -> np.ndarray:
        """``n x p`` matrix of previous-time values, zero on ``t = 0`` rows."""
        lag = np.zeros_like(self.values)
        lag[:, :, 1:] = self.values[:, :, :-1]
        return lag.reshape(self.p, -1).T.copy()

    def condition_of_row(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_conditions), self.T)

    def initial_rows(self) -> np.ndarray:
        """Boolean mask of ``t = 0`` rows."""
        return np.tile(np.arange(self.T) == 0, self.n_conditions)

    def subset_nodes(self, order: Sequence[int]) -> "TimeCourseDataset":
        order = list(order)
        return TimeCourseDataset(
            [self.node_names[i] for i in order], self.conditions, self.times, self.values[order]
        )

    def with_values(self, values: np.ndarray) -> "TimeCourseDataset":
        return TimeCourseDataset(self.node_names, self.conditions, self.times, values)


def _check_unique(items: Sequence[str], what: str) -> None:
    seen = set()
    for item in items:
        if item in seen:
            raise DataError(f"duplicate {what} {item!r}")
        seen.add(item)


@dataclass(frozen=True)
class InterventionDesign:
    """Inhibited nodes per condition, plus the scheme used to model them.

    Targets are stored by node name and resolved against a dataset with
    :meth:`inhibited`; conditions absent from ``targets`` carry no
    inhibitors.
    """

    targets: Mapping[str, frozenset[str]] = field(default_factory=dict)
    scheme: InterventionScheme = field(default_factory=InterventionScheme)

    def __post_init__(self):
        frozen = {str(c): frozenset(str(n) for n in names) for c, names in self.targets.items()}
        object.__setattr__(self, "targets", frozen)

    @property
    def is_trivial(self) -> bool:
        """True when no intervention changes the likelihood."""
        return self.scheme.kind is InterventionKind.NONE or not any(self.targets.values())

    def inhibited(self, data: TimeCourseDataset) -> np.ndarray:
        """Boolean ``(n_conditions, p)`` matrix, true where node is inhibited."""
        mask = np.zeros((data.n_conditions, data.p), dtype=bool)
        for label, names in self.targets.items():
            if label not in data.conditions:
                raise DataError(f"design condition {label!r} is not in the dataset")
            c = data.conditions.index(label)
            for name in names:
                mask[c, data.node_index(name)] = True
        return mask

    def with_scheme(self, scheme: InterventionScheme) -> "InterventionDesign":
        return InterventionDesign(self.targets, scheme)


@dataclass(frozen=True, eq=False)
class NetworkPrior:
    """Prior graph (``prior_graph[i, j]`` means edge ``i -> j``) and penalty strength."""

    prior_graph: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        graph = np.array(self.prior_graph, dtype=bool)
        if graph.ndim != 2 or graph.shape[0] != graph.shape[1]:
            raise DataError("prior graph must be square")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise DataError(f"prior strength must be finite and nonnegative, got {self.lam}")
        graph.setflags(write=False)
        object.__setattr__(self, "prior_graph", graph)
        object.__setattr__(self, "lam", float(self.lam))

    @classmethod
    def empty(cls, p: int, lam: float = 0.0) -> "NetworkPrior":
        return cls(np.zeros((p, p), dtype=bool), lam)

    def parents(self, j: int) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.prior_graph[:, j]).tolist())


# ---------------------------------------------------------------------------
# file IO
# ---------------------------------------------------------------------------


def load_dataset(path, log_transform: bool = False) -> TimeCourseDataset:
    """Read a wide-format CSV dataset.

    Rows are grouped by condition (in order of first appearance) and sorted
    by time within each condition. Every condition must be observed at the
    same set of time points.

    Raises
    ------
    DataError
        On blank or non-numeric cells, duplicate ``(condition, time)`` pairs,
        or an incomplete condition-by-time grid.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 3 or header[0] != "condition" or header[1] != "time":
        raise DataError(f"{path}: header must start with 'condition,time' followed by node names")
    nodes = header[2:]
    _check_unique(nodes, "node name")

    cells: dict[tuple[str, float], list[float]] = {}
    condition_order: list[str] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
        cond = row[0].strip()
        if not cond:
            raise DataError(f"{path}:{lineno}: blank cell in column 'condition'")
        t = _parse_number(row[1], path, lineno, "time")
        vals = [_parse_number(row[k], path, lineno, header[k]) for k in range(2, len(row))]
        if (cond, t) in cells:
            raise DataError(f"{path}:{lineno}: duplicate observation for condition {cond!r} at time {t:g}")
        if cond not in condition_order:
            condition_order.append(cond)
        cells[(cond, t)] = vals

    times = sorted({t for _, t in cells})
    for cond in condition_order:
        for t in times:
            if (cond, t) not in cells:
                raise DataError(f"{path}: condition {cond!r} has no observation at time {t:g}")

    values = np.empty((len(nodes), len(condition_order), len(times)))
    for c, cond in enumerate(condition_order):
        for k, t in enumerate(times):
            values[:, c, k] = cells[(cond, t)]
    if log_transform:
        if np.any(values <= 0):
            raise DataError(f"{path}: log transform requires strictly positive values")
        values = np.log(values)
    return TimeCourseDataset(nodes, condition_order, times, values)


def _parse_number(text: str, path, lineno: int, column: str) -> float:
    text = text.strip()
    if not text:
        raise DataError(f"{path}:{lineno}: blank cell in column {column!r}")
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{path}:{lineno}: non-numeric value {text!r} in column {column!r}") from None
    if not math.isfinite(value):
        raise DataError(f"{path}:{lineno}: non-finite value {text!r} in column {column!r}")
    return value


def write_dataset(data: TimeCourseDataset, path) -> None:
    # repr() round-trips float64 exactly
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["condition", "time", *data.node_names])
        for c, cond in enumerate(data.conditions):
            for k, t in enumerate(data.times):
                writer.writerow([cond, repr(t), *(repr(float(v)) for v in data.values[:, c, k])])


def load_intervention_design(path, scheme: InterventionScheme | None = None) -> InterventionDesign:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise DataError(f"{path}: expected a JSON object mapping condition -> [node names]")
    targets = {}
    for cond, names in raw.items():
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise DataError(f"{path}: condition {cond!r} must map to a list of node names")
        targets[cond] = frozenset(names)
    return InterventionDesign(targets, scheme or InterventionScheme())


def write_intervention_design(design: InterventionDesign, path, conditions: Iterable[str] | None = None) -> None:
    labels = list(conditions) if conditions is not None else list(design.targets)
    payload = {c: sorted(design.targets.get(c, ())) for c in labels}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_edge_list(path, node_names: Sequence[str]) -> np.ndarray:
    """Read a ``parent,child`` CSV into a boolean adjacency matrix."""
    path = Path(path)
    index = {name: i for i, name in enumerate(node_names)}
    adj = np.zeros((len(node_names), len(node_names)), dtype=bool)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["parent", "child"]:
            raise DataError(f"{path}: edge list header must be 'parent,child'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise DataError(f"{path}:{lineno}: expected parent,child")
            parent, child = row[0].strip(), row[1].strip()
            for name in (parent, child):
                if name not in index:
                    raise DataError(f"{path}:{lineno}: unknown node name {name!r}")
            adj[index[parent], index[child]] = True
    return adj


def write_edge_list(adj: np.ndarray, node_names: Sequence[str], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["parent", "child"])
        for i, j in zip(*np.nonzero(adj)):
            writer.writerow([node_names[i], node_names[j]])


def load_prior_network(path, node_names: Sequence[str], lam: float) -> NetworkPrior:
    return NetworkPrior(load_edge_list(path, node_names), lam)
