"""Per-cluster EMA visit counts: the cross-iteration coverage memory.

Counts start uniform at a smoothing constant alpha, decay once per batch
with factor gamma, and absorb (1 - gamma) per question assigned to a
cluster. The rarity bonus exp(-n_c / mean(n)) depends only on relative
visitation, so uniformly scaled counts give identical bonuses.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import BadParamError, FormatError, LengthMismatchError
from .jsonfmt import dumps


@dataclass(frozen=True)
class CoverageState:
    """Immutable snapshot of the per-cluster visit counter."""

    k: int
    alpha: float
    gamma: float
    counts: np.ndarray
    batches_seen: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise BadParamError(f"k must be >= 1, got {self.k}")
        if not self.alpha > 0.0:
            raise BadParamError(f"alpha must be > 0, got {self.alpha}")
        if not 0.0 < self.gamma < 1.0:
            raise BadParamError(f"gamma must be in (0, 1), got {self.gamma}")
        arr = np.asarray(self.counts, dtype=np.float64)
        if arr.shape != (self.k,):
            raise LengthMismatchError(
                f"counts has shape {arr.shape}, expected ({self.k},)"
            )
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
            raise BadParamError("counts must be finite and non-negative")
        if self.batches_seen < 0:
            raise BadParamError("batches_seen must be non-negative")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "counts", arr)


def init_state(k: int, alpha: float = 1.0, gamma: float = 0.99) -> CoverageState:
    """Fresh state with every cluster count at ``alpha``."""
    if k < 1:
        raise BadParamError(f"k must be >= 1, got {k}")
    if not alpha > 0.0:
        raise BadParamError(f"alpha must be > 0, got {alpha}")
    return CoverageState(k=k, alpha=alpha, gamma=gamma, counts=np.full(k, float(alpha)))


def update_batch(state: CoverageState, batch_counts: np.ndarray) -> CoverageState:
    """One EMA step: counts <- gamma * counts + (1 - gamma) * batch_counts."""
    m = np.asarray(batch_counts, dtype=np.float64)
    if m.shape != (state.k,):
        raise LengthMismatchError(
            f"batch tally has shape {m.shape}, expected ({state.k},)"
        )
    if np.any(m < 0):
        raise BadParamError("batch tallies must be non-negative")
    new_counts = state.gamma * state.counts + (1.0 - state.gamma) * m
    return CoverageState(
        k=state.k,
        alpha=state.alpha,
        gamma=state.gamma,
        counts=new_counts,
        batches_seen=state.batches_seen + 1,
    )


def rarity(state: CoverageState, c: int) -> float:
    """Bonus exp(-n_c / mean(n)) in (0, 1]; 1.0 for a never-visited cluster."""
    if not 0 <= c < state.k:
        raise IndexError(f"cluster index {c} outside [0, {state.k})")
    mean = float(state.counts.mean())
    return math.exp(-float(state.counts[c]) / mean)


def warm_start(prev: CoverageState) -> CoverageState:
    """Carry counts into the next iteration unchanged (cross-iteration memory)."""
    return CoverageState(
        k=prev.k,
        alpha=prev.alpha,
        gamma=prev.gamma,
        counts=prev.counts,
        batches_seen=prev.batches_seen,
    )


def save_state(state: CoverageState, path: str) -> None:
    doc = {
        "k": state.k,
        "alpha": state.alpha,
        "gamma": state.gamma,
        "counts": state.counts,
        "batches_seen": state.batches_seen,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(doc, indent=2))
        fh.write("\n")


def load_state(path: str) -> CoverageState:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON in coverage-state file: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise FormatError("coverage-state file must contain a JSON object")
    for name in ("k", "alpha", "gamma", "counts"):
        if name not in doc:
            raise FormatError(f"missing field '{name}'")
    k = doc["k"]
    if not isinstance(k, int) or k < 1:
        raise FormatError(f"field 'k' must be a positive integer, got {k!r}")
    alpha = doc["alpha"]
    if not isinstance(alpha, (int, float)) or isinstance(alpha, bool) or not alpha > 0:
        raise FormatError(f"field 'alpha' must be > 0, got {alpha!r}")
    gamma = doc["gamma"]
    if not isinstance(gamma, (int, float)) or isinstance(gamma, bool) or not 0 < gamma < 1:
        raise FormatError(f"field 'gamma' must be in the open interval (0, 1), got {gamma!r}")
    counts = doc["counts"]
    if not isinstance(counts, list) or len(counts) != k:
        raise FormatError(f"field 'counts' must list exactly k={k} numbers")
    for i, c in enumerate(counts):
        if not isinstance(c, (int, float)) or isinstance(c, bool) or c < 0 or not math.isfinite(c):
            raise FormatError(f"count {i} must be a finite non-negative number, got {c!r}")
    batches = doc.get("batches_seen", 0)
    if not isinstance(batches, int) or batches < 0:
        raise FormatError(f"field 'batches_seen' must be a non-negative integer, got {batches!r}")
    return CoverageState(
        k=k,
        alpha=float(alpha),
        gamma=float(gamma),
        counts=np.asarray(counts, dtype=np.float64),
        batches_seen=batches,
    )
