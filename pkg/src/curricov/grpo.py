"""Group-relative advantages, the clipped surrogate, and a categorical policy step.

The policy step performs one exact-gradient ascent step of the mean clipped
surrogate minus a KL penalty toward a reference categorical policy. Ratios
are importance weights against the reference logits, so a caller that passes
the pre-step logits as the reference gets plain policy-gradient behaviour
(ratio 1 everywhere); clipping only activates when samples are reused across
several steps against a frozen reference.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    BadParamError,
    GroupTooSmallError,
    NotNormalizedError,
    SupportViolationError,
)


@dataclass(frozen=True)
class PolicyUpdateConfig:
    """Clip threshold, KL coefficient, and ascent step size."""

    epsilon: float = 0.2
    beta: float = 0.0
    step_size: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise BadParamError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.beta < 0.0:
            raise BadParamError(f"beta must be >= 0, got {self.beta}")
        if not self.step_size > 0.0:
            raise BadParamError(f"step_size must be > 0, got {self.step_size}")


def advantages(rewards: Sequence[float]) -> list[float]:
    """Rewards centered on the within-group mean; always sums to zero."""
    g = len(rewards)
    if g < 2:
        raise GroupTooSmallError(
            f"group baseline needs at least 2 rewards, got {g}"
        )
    arr = np.asarray(rewards, dtype=np.float64)
    return [float(a) for a in arr - arr.mean()]


def clipped_term(rho: float, advantage: float, epsilon: float) -> float:
    """min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)."""
    if not rho > 0.0:
        raise BadParamError(f"importance ratio must be > 0, got {rho}")
    clipped = min(max(rho, 1.0 - epsilon), 1.0 + epsilon)
    return min(rho * advantage, clipped * advantage)


def categorical_kl(p: Sequence[float], q: Sequence[float]) -> float:
    """KL(p || q) for categorical distributions, with 0 * log(0/q) = 0."""
    pa = np.asarray(p, dtype=np.float64)
    qa = np.asarray(q, dtype=np.float64)
    if pa.shape != qa.shape:
        raise NotNormalizedError(f"shapes differ: {pa.shape} vs {qa.shape}")
    for name, arr in (("p", pa), ("q", qa)):
        if np.any(arr < 0):
            raise NotNormalizedError(f"{name} has negative entries")
        if abs(float(arr.sum()) - 1.0) > 1e-9:
            raise NotNormalizedError(f"{name} sums to {arr.sum()}, expected 1")
    support = pa > 0
    if np.any(qa[support] <= 0.0):
        raise SupportViolationError("q assigns zero mass where p is positive")
    return float(np.sum(pa[support] * np.log(pa[support] / qa[support])))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def surrogate_objective(
    logits: np.ndarray,
    samples: Sequence[tuple[int, float]],
    cfg: PolicyUpdateConfig,
    ref_logits: np.ndarray,
) -> float:
    """Mean clipped surrogate minus beta * KL(softmax(logits) || softmax(ref))."""
    if not samples:
        raise BadParamError("samples must be non-empty")
    probs = softmax(logits)
    ref = softmax(ref_logits)
    total = 0.0
    for idx, adv in samples:
        if not 0 <= idx < probs.shape[0]:
            raise IndexError(f"sample index {idx} outside [0, {probs.shape[0]})")
        total += clipped_term(probs[idx] / ref[idx], adv, cfg.epsilon)
    value = total / len(samples)
    if cfg.beta > 0.0:
        value -= cfg.beta * categorical_kl(probs, ref)
    return value


def policy_step(
    logits: np.ndarray,
    samples: Sequence[tuple[int, float]],
    cfg: PolicyUpdateConfig,
    ref_logits: np.ndarray,
) -> np.ndarray:
    """One exact-gradient ascent step on ``surrogate_objective``.

    Samples are (category index, advantage) pairs. Deterministic; the input
    logits are not modified.
    """
    theta = np.asarray(logits, dtype=np.float64)
    ref = np.asarray(ref_logits, dtype=np.float64)
    if theta.shape != ref.shape:
        raise BadParamError(f"logit shapes differ: {theta.shape} vs {ref.shape}")
    if not samples:
        raise BadParamError("samples must be non-empty")
    probs = softmax(theta)
    ref_probs = softmax(ref)
    n = theta.shape[0]

    grad = np.zeros(n, dtype=np.float64)
    for idx, adv in samples:
        if not 0 <= idx < n:
            raise IndexError(f"sample index {idx} outside [0, {n})")
        rho = probs[idx] / ref_probs[idx]
        # min() tracks the clipped branch (constant in theta) exactly when the
        # ratio has left the clip range on the side the advantage pushes toward
        if (rho > 1.0 + cfg.epsilon and adv > 0) or (rho < 1.0 - cfg.epsilon and adv < 0):
            continue
        onehot = np.zeros(n)
        onehot[idx] = 1.0
        grad += adv * rho * (onehot - probs)
    grad /= len(samples)

    if cfg.beta > 0.0:
        # d/dtheta KL(softmax(theta) || q) = probs * (log(probs/q) - KL)
        log_ratio = np.log(probs) - np.log(ref_probs)
        kl = float(np.sum(probs * log_ratio))
        grad -= cfg.beta * probs * (log_ratio - kl)

    return theta + cfg.step_size * grad
