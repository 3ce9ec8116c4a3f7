"""Writers and readers for result files (CSV, JSON, DOT)."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError


def fmt(x: float) -> str:
    return repr(float(x))


def sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_matrix_csv(matrix: np.ndarray, names: Sequence[str], path) -> None:
    """Square matrix with node names as header row and first column (row = parent)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["", *names])
        for name, row in zip(names, matrix):
            w.writerow([name, *(fmt(v) for v in row)])


def read_matrix_csv(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path}: empty matrix file")
    names = [s.strip() for s in rows[0][1:]]
    if len(rows) - 1 != len(names):
        raise DataError(f"{path}: expected {len(names)} rows, found {len(rows) - 1}")
    mat = np.empty((len(names), len(names)))
    for k, row in enumerate(rows[1:]):
        if row[0].strip() != names[k] or len(row) != len(names) + 1:
            raise DataError(f"{path}:{k + 2}: row label/width does not match header")
        try:
            mat[k] = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise DataError(f"{path}:{k + 2}: {exc}") from None
    return names, mat


def posterior_summary(posteriors, names: Sequence[str], top_k: int = 10) -> dict:
    out = {}
    for post in posteriors:
        out[names[post.node]] = {
            "log_evidence": post.log_evidence,
            "n_models": len(post.parent_sets),
            "excluded": [{"parents": [names[i] for i in s], "reason": r} for s, r in post.excluded],
            "top_models": [
                {
                    "parents": [names[i] for i in post.parent_sets[r]],
                    "probability": float(post.probs[r]),
                    "log_score": float(post.log_scores[r]),
                    "log_marginal_likelihood": float(post.log_marginals[r]),
                }
                for r in post.top(top_k)
            ],
        }
    return out


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def write_dot(probs: np.ndarray, names: Sequence[str], path, threshold: float = 0.5) -> None:
    lines = ["digraph network {"]
    for name in names:
        lines.append(f'  "{name}";')
    for i, j in zip(*np.nonzero(probs >= threshold)):
        lines.append(f'  "{names[i]}" -> "{names[j]}" [label="{probs[i, j]:.3f}"];')
    lines.append("}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_roc_csv(curve, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr", "threshold"])
        for f, t, tau in curve.rows():
            w.writerow([fmt(f), fmt(t), fmt(tau)])


def roc_summary(curve) -> dict:
    return {
        "auc": curve.auc,
        "positives": curve.positives,
        "negatives": curve.negatives,
        "operating_point_tau_0.5": {"fpr": curve.half_point[0], "tpr": curve.half_point[1]},
    }
