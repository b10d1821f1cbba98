"""Coverage diagnostics over a cluster frequency vector.

Entropy is reported in bits and normalized by log2(K); the Gini coefficient
is the mean absolute pairwise difference scaled by twice the mean; the
Lorenz curve accumulates shares after an ascending sort. Zero-count
clusters stay in every statistic -- missing coverage is the point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AllZeroError, BadParamError


@dataclass(frozen=True)
class CoverageReport:
    active_clusters: int
    std_dev: float
    entropy_bits: float
    normalized_entropy: float
    gini: float
    top10_share: float
    lorenz: list[tuple[float, float]]

    def to_dict(self) -> dict:
        return {
            "active_clusters": self.active_clusters,
            "std_dev": self.std_dev,
            "entropy_bits": self.entropy_bits,
            "normalized_entropy": self.normalized_entropy,
            "gini": self.gini,
            "top10_share": self.top10_share,
            "lorenz": [[x, y] for x, y in self.lorenz],
        }


def coverage_report(counts: Sequence[float] | np.ndarray) -> CoverageReport:
    """Diagnostics for one non-negative counts vector (at least one positive)."""
    arr = np.asarray(counts, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise BadParamError(f"counts must be a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise BadParamError("counts must be finite and non-negative")
    total = float(arr.sum())
    if total <= 0.0:
        raise AllZeroError("all counts are zero; no distribution to report on")
    k = arr.shape[0]

    freqs = arr / total
    positive = freqs[freqs > 0]
    entropy = float(-(positive * np.log2(positive)).sum()) + 0.0
    norm_entropy = entropy / math.log2(k) + 0.0 if k > 1 else 0.0

    sorted_counts = np.sort(arr)
    # Gini via the sorted identity; equals sum_ij |x_i - x_j| / (2 K sum(x))
    ranks = np.arange(1, k + 1, dtype=np.float64)
    gini = max(0.0, float(2.0 * (ranks * sorted_counts).sum() / (k * total) - (k + 1) / k))

    top = min(10, k)
    top10_share = float(sorted_counts[-top:].sum() / total)

    cum = np.concatenate(([0.0], np.cumsum(sorted_counts) / total))
    cum[-1] = 1.0
    xs = np.arange(k + 1, dtype=np.float64) / k
    xs[-1] = 1.0
    lorenz = [(float(x), float(y)) for x, y in zip(xs, cum)]

    return CoverageReport(
        active_clusters=int(np.count_nonzero(arr)),
        std_dev=float(arr.std()),
        entropy_bits=entropy,
        normalized_entropy=norm_entropy,
        gini=gini,
        top10_share=top10_share,
        lorenz=lorenz,
    )


def lorenz_csv(report: CoverageReport) -> str:
    """Lorenz points as CSV text: header plus K+1 rows from (0,0) to (1,1)."""
    lines = ["cum_cluster_frac,cum_question_frac"]
    lines.extend(f"{x!r},{y!r}" for x, y in report.lorenz)
    return "\n".join(lines) + "\n"
