"""Question rewards: ZPD-gated difficulty targeting amplified by cluster rarity.

The gate is a triangular ramp peaking at the target solvability p_star,
hard-zeroed outside [p_min, p_max]. The final reward multiplies the gate by
(1 + lambda * rarity), so coverage pressure amplifies the difficulty signal
instead of competing with it: an out-of-window question earns zero no matter
how rare its cluster.

``repetition_penalty`` is a batch-local baseline for comparison runs. It is
an embedding-similarity proxy (this engine has no tokenizer, so no lexical
n-gram overlap is available), not a reimplementation of any lexical penalty.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .clusters import ClusterSpace, assign
from .coverage import CoverageState, rarity, update_batch
from .embedding import EmbeddingVector
from .errors import (
    BadParamError,
    EmptyRolloutsError,
    LengthMismatchError,
    MissingVectorError,
)


@dataclass(frozen=True)
class RewardConfig:
    """Gate window, peak, and diversity weight."""

    p_star: float = 0.75
    delta: float = 0.4
    p_min: float = 0.5
    p_max: float = 0.9
    lambda_: float = 5.0

    def __post_init__(self):
        if not 0.0 <= self.p_min <= self.p_star <= self.p_max <= 1.0:
            raise BadParamError(
                f"need 0 <= p_min <= p_star <= p_max <= 1, got "
                f"({self.p_min}, {self.p_star}, {self.p_max})"
            )
        if not self.delta > 0.0:
            raise BadParamError(f"delta must be > 0, got {self.delta}")
        if self.lambda_ < 0.0:
            raise BadParamError(f"lambda must be >= 0, got {self.lambda_}")

    @classmethod
    def from_dict(cls, obj: Mapping) -> "RewardConfig":
        known = {"p_star", "delta", "p_min", "p_max", "lambda"}
        unknown = set(obj) - known
        if unknown:
            raise BadParamError(f"unknown reward config fields: {sorted(unknown)}")
        kwargs = {k: obj[k] for k in ("p_star", "delta", "p_min", "p_max") if k in obj}
        if "lambda" in obj:
            kwargs["lambda_"] = obj["lambda"]
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "p_star": self.p_star,
            "delta": self.delta,
            "p_min": self.p_min,
            "p_max": self.p_max,
            "lambda": self.lambda_,
        }


@dataclass(frozen=True)
class ScoredQuestion:
    """Per-question scoring result; cluster/rarity present only in-window."""

    id: str
    p: float
    cluster: int | None
    zpd: float
    rarity: float | None
    reward: float


def solvability(verdicts: Sequence[bool]) -> float:
    """Fraction of rollouts the verifier marked correct."""
    if len(verdicts) == 0:
        raise EmptyRolloutsError("solvability needs at least one rollout verdict")
    return sum(bool(v) for v in verdicts) / len(verdicts)


def zpd_gate(p: float, cfg: RewardConfig) -> float:
    """Triangular ramp peaking at p_star, exactly zero outside [p_min, p_max]."""
    if not cfg.p_min <= p <= cfg.p_max:
        return 0.0
    return max(0.0, 1.0 - abs(p - cfg.p_star) / cfg.delta)


def final_reward(p: float, rarity_bonus: float, cfg: RewardConfig) -> float:
    """Gate value amplified by (1 + lambda * rarity); zero whenever the gate is."""
    gate = zpd_gate(p, cfg)
    if gate == 0.0:
        return 0.0
    return gate * (1.0 + cfg.lambda_ * rarity_bonus)


def score_batch(
    questions: Sequence[tuple[str, Sequence[bool]]],
    space: ClusterSpace,
    vectors: Mapping[str, EmbeddingVector],
    state: CoverageState,
    cfg: RewardConfig,
) -> tuple[list[ScoredQuestion], np.ndarray, CoverageState]:
    """Score one batch and apply the single post-batch coverage update.

    Rarity for every question uses the counts frozen at batch start, so
    per-question rewards do not depend on scoring order. Only in-window
    questions are assigned clusters and tallied; everything else scores
    zero and leaves the coverage counter untouched.
    """
    if state.k != space.k:
        raise LengthMismatchError(
            f"coverage state has k={state.k}, cluster space has k={space.k}"
        )
    for qid, _ in questions:
        if qid not in vectors:
            raise MissingVectorError(qid)

    scored: list[ScoredQuestion] = []
    tallies = np.zeros(space.k, dtype=np.int64)
    for qid, verdicts in questions:
        p = solvability(verdicts)
        gate = zpd_gate(p, cfg)
        if cfg.p_min <= p <= cfg.p_max:
            c = assign(space, vectors[qid])
            d = rarity(state, c)
            scored.append(
                ScoredQuestion(
                    id=qid,
                    p=p,
                    cluster=c,
                    zpd=gate,
                    rarity=d,
                    reward=final_reward(p, d, cfg),
                )
            )
            tallies[c] += 1
        else:
            scored.append(
                ScoredQuestion(id=qid, p=p, cluster=None, zpd=gate, rarity=None, reward=0.0)
            )
    new_state = update_batch(state, tallies)
    return scored, tallies, new_state


def repetition_penalty(batch_vectors: Sequence[EmbeddingVector]) -> list[float]:
    """Batch-local redundancy factor: 1 - max cosine to any other batch member.

    Clamped to [0, 1]; a singleton batch gets 1.0. Embedding-similarity
    proxy for a lexical repetition penalty.
    """
    n = len(batch_vectors)
    if n == 0:
        raise BadParamError("repetition penalty needs at least one vector")
    if n == 1:
        return [1.0]
    mat = np.stack([v.components for v in batch_vectors])
    sims = mat @ mat.T
    np.fill_diagonal(sims, -np.inf)
    factors = 1.0 - sims.max(axis=1)
    return [float(f) for f in np.clip(factors, 0.0, 1.0)]
