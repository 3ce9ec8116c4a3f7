"""Per-node regression designs.

For node ``j`` the response stacks ``x[j, c, t]`` over conditions and times.
The fixed part ``X0`` holds two indicators (``t > 0`` and ``t = 0``). The
parent part holds lag-1 parent values (zero on ``t = 0`` rows), modified by
the intervention scheme, and is projected onto the orthogonal complement of
``X0``.

Intervention rules, for a parent ``i`` of node ``j``:

========================  ==================================================
perfect / out             zero column ``i`` on rows of conditions where ``i``
                          is inhibited
perfect / in              zero every parent column on rows of conditions
                          where ``j`` is inhibited
fixed / out               add an indicator of the conditions inhibiting ``i``
                          whenever ``i`` is a parent (identical indicators
                          are merged)
fixed / in                add an indicator of the conditions inhibiting
                          ``j``, whatever the parent set
mechanism / out           split column ``i`` into control-row and
                          inhibited-row copies
mechanism / in            split every parent column by whether ``j`` is
                          inhibited
perfect-fixed             perfect zeroing plus the fixed-effect indicator
========================  ==================================================

Indicator columns cover ``t = 0`` rows as well, since an inhibitor acts for
the whole experiment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import Direction, InterventionDesign, TimeCourseDataset
from .errors import DataError, DesignRankError

__all__ = [
    "ColumnBank",
    "ColumnTag",
    "DesignPair",
    "ParentSet",
    "RANK_RTOL",
    "build_design",
    "fixed_design",
    "orthogonalize",
]

# squared-norm ratio below which a column counts as lost
RANK_RTOL = 1e-12


@dataclass(frozen=True, order=True)
class ParentSet:
    node: int
    parents: tuple[int, ...] = ()

    def __post_init__(self):
        parents = tuple(sorted(int(i) for i in self.parents))
        if len(set(parents)) != len(parents):
            raise DataError(f"duplicate parents in {parents}")
        object.__setattr__(self, "parents", parents)

    def __len__(self) -> int:
        return len(self.parents)

    def validate(self, p: int, m: int | None = None) -> None:
        if not 0 <= self.node < p:
            raise DataError(f"node index {self.node} out of range for p={p}")
        if any(not 0 <= i < p for i in self.parents):
            raise DataError(f"parent indices {self.parents} out of range for p={p}")
        if m is not None and len(self.parents) > m:
            raise DataError(f"parent set of size {len(self.parents)} exceeds in-degree bound {m}")


@dataclass(frozen=True)
class ColumnTag:
    """Origin of one parent-design column.

    ``kind`` is ``"parent"``, ``"fixed-effect"`` or ``"mechanism"``.
    Parent and mechanism columns carry the parent index in ``node``;
    mechanism columns also carry ``regime`` (``"control"`` or
    ``"inhibited"``). Fixed-effect columns carry the inhibited condition
    indices and the target nodes sharing that indicator.
    """

    kind: str
    node: int | None = None
    regime: str | None = None
    conditions: tuple[int, ...] = ()
    targets: tuple[int, ...] = ()

    def describe(self, data: TimeCourseDataset | None = None) -> str:
        name = (lambda i: data.node_names[i]) if data is not None else str
        if self.kind == "parent":
            return f"parent({name(self.node)})"
        if self.kind == "mechanism":
            return f"mechanism({name(self.node)},{self.regime})"
        conds = (
            [data.conditions[c] for c in self.conditions] if data is not None else list(map(str, self.conditions))
        )
        return f"fixed-effect({'+'.join(map(name, self.targets))}@{'|'.join(conds)})"


@dataclass(frozen=True, eq=False)
class DesignPair:
    X0: np.ndarray
    Xgamma: np.ndarray
    response: np.ndarray
    column_tags: tuple[ColumnTag, ...]
    pset: ParentSet | None = None

    @property
    def n(self) -> int:
        return self.X0.shape[0]

    @property
    def a(self) -> int:
        return self.X0.shape[1]

    @property
    def b(self) -> int:
        return self.Xgamma.shape[1]


def fixed_design(data: TimeCourseDataset) -> np.ndarray:
    """The ``n x 2`` indicator matrix ``[1{t>0}, 1{t=0}]``."""
    first = data.initial_rows()
    return np.column_stack([~first, first]).astype(np.float64)


def orthogonalize(X0: np.ndarray, Xraw: np.ndarray) -> np.ndarray:
    """Project the columns of ``Xraw`` onto the orthogonal complement of ``span(X0)``."""
    X0 = np.asarray(X0, dtype=np.float64)
    Xraw = np.asarray(Xraw, dtype=np.float64)
    Q, R = np.linalg.qr(X0)
    diag = np.abs(np.diag(R))
    if diag.size < X0.shape[1] or np.any(diag <= 1e-12 * max(1.0, diag.max(initial=0.0))):
        raise DesignRankError("fixed design X0 is rank deficient", column="X0")
    if Xraw.shape[1] == 0:
        return Xraw.copy()
    return Xraw - Q @ (Q.T @ Xraw)


class ColumnBank:
    """Every column any parent set of one node can use, orthogonalized once.

    A parent set maps to a subset of bank columns via :meth:`columns_for`;
    orthogonalization is column-wise linear so projecting the bank is the
    same as projecting each assembled design.
    """

    def __init__(self, data: TimeCourseDataset, design: InterventionDesign, node: int):
        if not 0 <= node < data.p:
            raise DataError(f"node index {node} out of range for p={data.p}")
        self.node = node
        self.data = data
        self.X0 = fixed_design(data)
        self.response = data.response(node).copy()

        kind, direction = design.scheme.kind, design.scheme.direction
        inhibited = design.inhibited(data) if not design.is_trivial else np.zeros((data.n_conditions, data.p), bool)
        row_cond = data.condition_of_row()
        # rows where each node is inhibited, shape (n, p)
        inh_rows = inhibited[row_cond]
        lag = data.lagged()
        own = inh_rows[:, node]

        columns: list[np.ndarray] = []
        tags: list[ColumnTag] = []
        parent_cols: list[tuple[int, ...]] = []

        def add(col, tag):
            columns.append(col)
            tags.append(tag)
            return len(columns) - 1

        for i in range(data.p):
            base = lag[:, i].copy()
            if direction is Direction.OUT:
                hit = inh_rows[:, i]
            else:
                hit = own
            active = hit.any()
            if kind.zeroes_columns and active:
                base[hit] = 0.0
            if kind.splits_columns and active:
                idx = (
                    add(np.where(hit, 0.0, base), ColumnTag("mechanism", i, "control")),
                    add(np.where(hit, base, 0.0), ColumnTag("mechanism", i, "inhibited")),
                )
            else:
                idx = (add(base, ColumnTag("parent", i)),)
            parent_cols.append(idx)

        gated: dict[int, int] = {}
        always: list[int] = []
        if kind.adds_fixed_effect:
            if direction is Direction.OUT:
                by_set: dict[tuple[int, ...], list[int]] = {}
                for i in range(data.p):
                    conds = tuple(np.flatnonzero(inhibited[:, i]).tolist())
                    if conds:
                        by_set.setdefault(conds, []).append(i)
                for conds, targets in by_set.items():
                    col = np.isin(row_cond, conds).astype(np.float64)
                    k = add(col, ColumnTag("fixed-effect", conditions=conds, targets=tuple(targets)))
                    for i in targets:
                        gated[i] = k
            else:
                conds = tuple(np.flatnonzero(inhibited[:, node]).tolist())
                if conds:
                    col = np.isin(row_cond, conds).astype(np.float64)
                    always.append(add(col, ColumnTag("fixed-effect", conditions=conds, targets=(node,))))

        self.raw = np.column_stack(columns) if columns else np.zeros((data.n, 0))
        self.tags = tuple(tags)
        self.parent_cols = tuple(parent_cols)
        self.gated = gated
        self.always = tuple(always)
        self.X = orthogonalize(self.X0, self.raw)
        self.raw_sq = np.einsum("ij,ij->j", self.raw, self.raw)

    @property
    def n_columns(self) -> int:
        return self.raw.shape[1]

    def max_columns(self, m: int) -> int:
        """Upper bound on the design width over parent sets of size <= m."""
        widths = sorted((len(c) for c in self.parent_cols), reverse=True)[:m]
        return sum(widths) + min(m, len(set(self.gated.values()))) + len(self.always)

    def columns_for(self, parents: Iterable[int]) -> list[int]:
        parents = sorted(parents)
        cols = [k for i in parents for k in self.parent_cols[i]]
        for i in parents:
            k = self.gated.get(i)
            if k is not None and k not in cols:
                cols.append(k)
        cols.extend(self.always)
        return cols

    def design_for(self, pset: ParentSet) -> DesignPair:
        cols = self.columns_for(pset.parents)
        raw = self.raw[:, cols]
        X = self.X[:, cols]
        tags = tuple(self.tags[k] for k in cols)
        _check_rank(raw, X, tags, self.data)
        return DesignPair(self.X0, X, self.response, tags, pset)


def _check_rank(raw: np.ndarray, X: np.ndarray, tags: Sequence[ColumnTag], data=None) -> None:
    if X.shape[1] == 0:
        return
    raw_sq = np.einsum("ij,ij->j", raw, raw)
    proj_sq = np.einsum("ij,ij->j", X, X)
    R = np.linalg.qr(X, mode="r")
    for k in range(X.shape[1]):
        scale = raw_sq[k]
        if scale == 0.0 or proj_sq[k] <= RANK_RTOL * scale:
            raise DesignRankError(
                f"design column {tags[k].describe(data)} is all zero after augmentation/orthogonalization",
                column=tags[k],
                zero=True,
            )
        if R[k, k] ** 2 <= RANK_RTOL * scale:
            raise DesignRankError(
                f"design column {tags[k].describe(data)} is linearly dependent on earlier columns",
                column=tags[k],
            )


def build_design(data: TimeCourseDataset, design: InterventionDesign, pset: ParentSet) -> DesignPair:
    """Assemble the orthogonalized design for one node and parent set.

    Raises
    ------
    DesignRankError
        If the augmented parent columns are not of full column rank; the
        error names the first offending column.
    """
    pset.validate(data.p)
    return ColumnBank(data, design, pset.node).design_for(pset)
