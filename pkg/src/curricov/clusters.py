"""Fixed semantic partition: offline K-means over unit-norm embeddings.

The partition is built once from a reference corpus and then treated as a
static coordinate system. Lloyd iterations run plain Euclidean K-means
(equivalent ordering to cosine on unit-norm inputs); centroids are
re-normalized to unit length only once, after the final iteration.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .embedding import UNIT_NORM_TOL, EmbeddingVector, QuestionRecord
from .errors import (
    BadParamError,
    DimMismatchError,
    FormatError,
    NumericError,
    TooFewPointsError,
)
from .jsonfmt import dumps


@dataclass
class ClusterSpace:
    """K unit-norm centroids plus free-form provenance metadata."""

    k: int
    dim: int
    centroids: np.ndarray
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        arr = np.asarray(self.centroids, dtype=np.float64)
        if arr.shape != (self.k, self.dim):
            raise BadParamError(
                f"centroids shape {arr.shape} does not match (k={self.k}, dim={self.dim})"
            )
        norms = np.linalg.norm(arr, axis=1)
        bad = np.nonzero(np.abs(norms - 1.0) > UNIT_NORM_TOL)[0]
        if bad.size:
            raise BadParamError(
                f"centroid {int(bad[0])} has norm {norms[bad[0]]}, expected unit"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        self.centroids = arr


def kmeans_fit(
    corpus: list[QuestionRecord],
    k: int,
    seed: int,
    max_iters: int = 100,
    tol: float = 1e-6,
) -> ClusterSpace:
    """Lloyd K-means with seeded k-means++ initialization.

    Deterministic given ``seed``. Stops when the relative objective change
    falls below ``tol`` or after ``max_iters`` iterations; running out of
    iterations is not an error. Empty clusters are reseeded to the point
    farthest from its currently assigned centroid. The per-iteration
    objective history is stored in provenance.
    """
    if k < 1:
        raise BadParamError(f"k must be >= 1, got {k}")
    n = len(corpus)
    if n < k:
        raise TooFewPointsError(f"corpus has {n} points, need at least k={k}")
    points = np.stack([rec.vector.components for rec in corpus])

    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, k, rng)

    history: list[float] = []
    iterations = 0
    for iterations in range(1, max_iters + 1):
        d2 = _sq_dists(points, centroids)
        labels = np.argmin(d2, axis=1)
        labels = _repair_empty(labels, d2, k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, points)
        counts = np.bincount(labels, minlength=k).astype(np.float64)
        centroids = sums / counts[:, None]
        objective = float(np.sum((points - centroids[labels]) ** 2))
        history.append(objective)
        if len(history) >= 2:
            prev = history[-2]
            if abs(prev - objective) <= tol * max(prev, 1e-30):
                break

    norms = np.linalg.norm(centroids, axis=1)
    if np.any(norms < 1e-12):
        raise NumericError("a cluster mean collapsed to the zero vector")
    centroids /= norms[:, None]
    provenance = {
        "seed": seed,
        "n_points": n,
        "max_iters": max_iters,
        "tol": tol,
        "iterations": iterations,
        "objective_history": history,
    }
    return ClusterSpace(k=k, dim=points.shape[1], centroids=centroids, provenance=provenance)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = np.empty((k, points.shape[1]), dtype=np.float64)
    chosen[0] = points[rng.integers(n)]
    d2 = np.sum((points - chosen[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            raise NumericError(
                f"corpus has fewer than {k} distinct points; cannot seed {k} clusters"
            )
        idx = rng.choice(n, p=d2 / total)
        chosen[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - chosen[j]) ** 2, axis=1))
    return chosen


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # ||x - c||^2 expanded; safe for large corpora (no n*k*d temporary)
    p2 = np.sum(points**2, axis=1)[:, None]
    c2 = np.sum(centroids**2, axis=1)[None, :]
    d2 = p2 + c2 - 2.0 * (points @ centroids.T)
    return np.maximum(d2, 0.0)


def _repair_empty(labels: np.ndarray, d2: np.ndarray, k: int) -> np.ndarray:
    counts = np.bincount(labels, minlength=k)
    empties = np.nonzero(counts == 0)[0]
    if not empties.size:
        return labels
    labels = labels.copy()
    own_d2 = d2[np.arange(len(labels)), labels].astype(np.float64)
    for j in empties:
        # farthest point from its assigned centroid, but never one whose
        # move would empty the donor cluster
        for idx in np.argsort(-own_d2):
            donor = labels[idx]
            if counts[donor] <= 1 or own_d2[idx] == -np.inf:
                continue
            labels[idx] = j
            counts[donor] -= 1
            counts[j] += 1
            own_d2[idx] = -np.inf
            break
        else:
            raise NumericError("cannot repair an empty cluster")
    return labels


def assign(space: ClusterSpace, v: EmbeddingVector) -> int:
    """Index of the nearest centroid by inner product; ties take the lowest index."""
    if v.dim != space.dim:
        raise DimMismatchError(f"vector dim {v.dim} != space dim {space.dim}")
    return int(np.argmax(space.centroids @ v.components))


def save_space(space: ClusterSpace, path: str) -> None:
    doc = {
        "k": space.k,
        "dim": space.dim,
        "centroids": space.centroids,
        "provenance": space.provenance,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(doc, indent=2))
        fh.write("\n")


def load_space(path: str) -> ClusterSpace:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON in cluster-space file: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise FormatError("cluster-space file must contain a JSON object")
    for name in ("k", "dim", "centroids"):
        if name not in doc:
            raise FormatError(f"missing field '{name}'")
    k, dim = doc["k"], doc["dim"]
    if not isinstance(k, int) or k < 1:
        raise FormatError(f"field 'k' must be a positive integer, got {k!r}")
    if not isinstance(dim, int) or dim < 1:
        raise FormatError(f"field 'dim' must be a positive integer, got {dim!r}")
    rows = doc["centroids"]
    if not isinstance(rows, list) or len(rows) != k:
        raise FormatError(
            f"field 'centroids' must list exactly k={k} rows, got {len(rows) if isinstance(rows, list) else type(rows).__name__}"
        )
    centroids = np.empty((k, dim), dtype=np.float64)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != dim:
            raise FormatError(f"centroid {i} does not have dim={dim} components")
        centroids[i] = row
        norm = float(np.linalg.norm(centroids[i]))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise FormatError(f"centroid {i} has norm {norm}, expected unit")
    provenance = doc.get("provenance", {})
    if not isinstance(provenance, dict):
        raise FormatError("field 'provenance' must be an object")
    return ClusterSpace(k=k, dim=dim, centroids=centroids, provenance=provenance)
