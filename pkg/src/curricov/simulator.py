"""Deterministic desk-scale co-evolution of a questioner and solver.

The world is a set of topic centroids on the unit sphere, each with a
difficulty level. A categorical questioner picks topics; a per-topic solver
skill determines rollout success through a logistic curve. Iterations
alternate questioner policy-gradient steps (under one of three reward
modes) with pool generation and solver training, reproducing the
collapse-versus-coverage contrast at toy scale without any model training.

Reward modes:
  * ``prism``          -- ZPD gate amplified by the cluster-rarity bonus,
                          with the EMA coverage counter carried across
                          batches (and across iterations when warm-start
                          is on).
  * ``zpd_only``       -- the bare ZPD gate.
  * ``zpd_repetition`` -- the gate times the batch-local repetition factor.

The solver-initialised questioner option is proxied by resetting the
questioner's logits to uniform at each iteration start: a fresh, unbiased
generation prior standing in for re-deriving the questioner from the
current solver, which has no generative head in this world.

All randomness derives from one seed through per-(iteration, step,
question) substreams, so results do not depend on evaluation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import numpy as np

from .clusters import ClusterSpace
from .coverage import CoverageState, init_state, update_batch, warm_start
from .embedding import EmbeddingVector, normalize
from .errors import BadParamError, NumericError
from .grpo import PolicyUpdateConfig, advantages, policy_step, softmax
from .metrics import CoverageReport, coverage_report
from .rewards import (
    RewardConfig,
    repetition_penalty,
    score_batch,
    solvability,
    zpd_gate,
)

VALID_MODES = ("prism", "zpd_only", "zpd_repetition")

# substream tags: one per consumer of randomness
_PHASE_WORLD = 0
_PHASE_QUESTIONER = 1
_PHASE_POOL = 2
_PHASE_SOLVER_INIT = 3


def _substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


@dataclass(frozen=True)
class SimWorld:
    """Synthetic problem landscape: topic centroids plus difficulty levels."""

    k_sim: int
    dim: int
    topic_centroids: np.ndarray
    topic_difficulty_mean: np.ndarray
    embed_noise: float
    difficulty_noise: float
    seed: int


@dataclass(frozen=True)
class QuestionerState:
    """Categorical topic policy (softmax over logits) with a difficulty shift."""

    logits: np.ndarray
    difficulty_offset: np.ndarray


@dataclass(frozen=True)
class SolverState:
    """Per-topic competence in [0, 1] with a logistic success curve."""

    skill: np.ndarray
    learn_rate: float
    steepness: float


@dataclass(frozen=True)
class SimQuestion:
    topic: int
    difficulty: float
    vector: EmbeddingVector


@dataclass(frozen=True)
class SimConfig:
    """Full run configuration; JSON files mirror these field names."""

    seed: int
    iterations: int = 4
    questioner_steps: int = 6
    solver_steps: int = 20
    group_size: int = 8
    rollouts: int = 8
    mode: str = "prism"
    solver_init_questioner: bool | None = None
    reward: RewardConfig = field(default_factory=RewardConfig)
    gamma: float = 0.9
    alpha: float = 1.0
    k_sim: int = 32
    dim: int = 16
    embed_noise: float = 0.1
    difficulty_noise: float = 0.02
    pool_size: int = 500
    warm_start: bool = True
    solver_learn_rate: float = 0.018
    solver_steepness: float = 20.0
    skill_offset_min: float = 0.01
    skill_offset_max: float = 0.10
    epsilon: float = 0.2
    beta: float = 0.0
    step_size: float = 0.3
    epochs: int = 18

    def __post_init__(self):
        if self.mode not in VALID_MODES:
            raise BadParamError(
                f"invalid mode {self.mode!r}; valid modes: {', '.join(VALID_MODES)}"
            )
        if self.solver_init_questioner is None:
            # each method's own convention: the coverage-aware questioner is
            # re-derived fresh each iteration, the gate-only baselines chain
            object.__setattr__(self, "solver_init_questioner", self.mode == "prism")
        if self.seed < 0:
            raise BadParamError(f"seed must be a non-negative integer, got {self.seed}")
        for name in ("iterations", "questioner_steps", "solver_steps", "rollouts", "pool_size", "epochs"):
            if getattr(self, name) < 1:
                raise BadParamError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.group_size < 2:
            raise BadParamError(
                f"group_size must be >= 2 for group-relative advantages, got {self.group_size}"
            )
        if self.k_sim < 2 or self.dim < 2:
            raise BadParamError("k_sim and dim must both be >= 2")
        if self.embed_noise < 0 or self.difficulty_noise < 0:
            raise BadParamError("noise scales must be >= 0")
        if not self.solver_learn_rate > 0:
            raise BadParamError(f"solver_learn_rate must be > 0, got {self.solver_learn_rate}")
        if not self.solver_steepness > 0:
            raise BadParamError(f"solver_steepness must be > 0, got {self.solver_steepness}")
        if not -1.0 <= self.skill_offset_min <= self.skill_offset_max <= 1.0:
            raise BadParamError(
                f"need -1 <= skill_offset_min <= skill_offset_max <= 1, got "
                f"({self.skill_offset_min}, {self.skill_offset_max})"
            )
        # delegate range checks for epsilon/beta/step_size
        PolicyUpdateConfig(self.epsilon, self.beta, self.step_size)

    @classmethod
    def from_dict(cls, obj: Mapping) -> "SimConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise BadParamError(f"unknown config fields: {sorted(unknown)}")
        if "seed" not in obj:
            raise BadParamError("config must provide an explicit 'seed'")
        kwargs = dict(obj)
        if "reward" in kwargs:
            if not isinstance(kwargs["reward"], Mapping):
                raise BadParamError("'reward' must be an object of reward config fields")
            kwargs["reward"] = RewardConfig.from_dict(kwargs["reward"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {}
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            out[name] = value.to_dict() if name == "reward" else value
        return out


@dataclass(frozen=True)
class IterationRecord:
    """Everything observed in one co-evolution iteration."""

    iteration: int
    report: CoverageReport
    pool_topic_counts: np.ndarray
    pool_size: int
    mean_p: float
    questioner_topic_counts: np.ndarray
    coverage_entering: np.ndarray
    coverage_leaving: np.ndarray


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    world: SimWorld
    records: list[IterationRecord]
    questioner: QuestionerState
    solver: SolverState
    coverage: CoverageState | None
    updates: list[dict] | None = None


def generate_world(
    k_sim: int = 32,
    dim: int = 16,
    seed: int = 0,
    embed_noise: float = 0.1,
    difficulty_noise: float = 0.05,
) -> SimWorld:
    """Random unit centroids with difficulty means evenly spread over [0.2, 0.9]."""
    if k_sim < 2:
        raise BadParamError(f"k_sim must be >= 2, got {k_sim}")
    if dim < 2:
        raise BadParamError(f"dim must be >= 2, got {dim}")
    rng = _substream(seed, _PHASE_WORLD)
    raw = rng.normal(size=(k_sim, dim))
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms < 1e-12):
        raise NumericError("degenerate draw while generating topic centroids")
    centroids = raw / norms[:, None]
    sims = centroids @ centroids.T
    np.fill_diagonal(sims, -np.inf)
    if sims.max() > 1.0 - 1e-9:
        raise NumericError("two topic centroids coincide; try another seed")
    means = np.linspace(0.2, 0.9, k_sim)
    return SimWorld(
        k_sim=k_sim,
        dim=dim,
        topic_centroids=centroids,
        topic_difficulty_mean=means,
        embed_noise=embed_noise,
        difficulty_noise=difficulty_noise,
        seed=seed,
    )


def sample_question(
    questioner: QuestionerState, world: SimWorld, rng: np.random.Generator
) -> SimQuestion:
    """Draw a topic from the policy, jitter its difficulty, embed with noise."""
    probs = softmax(questioner.logits)
    topic = int(rng.choice(world.k_sim, p=probs))
    delta = float(
        np.clip(
            world.topic_difficulty_mean[topic]
            + questioner.difficulty_offset[topic]
            + rng.normal(0.0, world.difficulty_noise),
            0.0,
            1.0,
        )
    )
    if world.embed_noise == 0.0:
        vector = EmbeddingVector(world.dim, world.topic_centroids[topic])
    else:
        vector = normalize(
            world.topic_centroids[topic] + rng.normal(0.0, world.embed_noise, size=world.dim)
        )
    return SimQuestion(topic=topic, difficulty=delta, vector=vector)


def rollout_verdicts(
    solver: SolverState, question: SimQuestion, n: int, rng: np.random.Generator
) -> list[bool]:
    """n Bernoulli verdicts with logistic success in skill minus difficulty."""
    if n < 1:
        raise BadParamError(f"rollout count must be >= 1, got {n}")
    margin = solver.steepness * (float(solver.skill[question.topic]) - question.difficulty)
    p_success = 1.0 / (1.0 + math.exp(-margin))
    return [bool(u < p_success) for u in rng.random(n)]


def train_solver(solver: SolverState, pool: list[tuple[int, float]]) -> SolverState:
    """One skill increment toward 1 per pool question of each topic."""
    skill = solver.skill.copy()
    for topic, _difficulty in pool:
        skill[topic] = min(1.0, skill[topic] + solver.learn_rate * (1.0 - skill[topic]))
    return SolverState(skill=skill, learn_rate=solver.learn_rate, steepness=solver.steepness)


def _empty_report(k: int) -> CoverageReport:
    # sentinel for an iteration whose filtered pool came up empty
    return CoverageReport(
        active_clusters=0,
        std_dev=0.0,
        entropy_bits=0.0,
        normalized_entropy=0.0,
        gini=0.0,
        top10_share=0.0,
        lorenz=[],
    )


def run_coevolution(config: SimConfig, record_updates: bool = False) -> SimResult:
    """Run the full loop: T iterations of questioner training then solver training."""
    world = generate_world(
        config.k_sim, config.dim, config.seed, config.embed_noise, config.difficulty_noise
    )
    space = ClusterSpace(
        k=config.k_sim,
        dim=config.dim,
        centroids=world.topic_centroids,
        provenance={"source": "simulator", "seed": config.seed},
    )
    questioner = QuestionerState(
        logits=np.zeros(config.k_sim), difficulty_offset=np.zeros(config.k_sim)
    )
    # every topic starts near the solver's edge: skill sits a small random
    # margin above that topic's difficulty, so all regions are viable at start
    offsets = _substream(config.seed, _PHASE_SOLVER_INIT).uniform(
        config.skill_offset_min, config.skill_offset_max, size=config.k_sim
    )
    solver = SolverState(
        skill=np.clip(world.topic_difficulty_mean + offsets, 0.0, 1.0),
        learn_rate=config.solver_learn_rate,
        steepness=config.solver_steepness,
    )
    cov = init_state(config.k_sim, config.alpha, config.gamma)
    pcfg = PolicyUpdateConfig(config.epsilon, config.beta, config.step_size)
    rcfg = config.reward

    records: list[IterationRecord] = []
    updates: list[dict] | None = [] if record_updates else None

    for t in range(1, config.iterations + 1):
        if config.solver_init_questioner:
            questioner = replace(questioner, logits=np.zeros(config.k_sim))
        cov = warm_start(cov) if config.warm_start else init_state(
            config.k_sim, config.alpha, config.gamma
        )
        entering = cov.counts.copy()
        q_tallies = np.zeros(config.k_sim, dtype=np.int64)

        for step in range(1, config.questioner_steps + 1):
            batch: list[SimQuestion] = []
            verdicts: list[list[bool]] = []
            for g in range(config.group_size):
                rng = _substream(config.seed, _PHASE_QUESTIONER, t, step, g)
                q = sample_question(questioner, world, rng)
                batch.append(q)
                verdicts.append(rollout_verdicts(solver, q, config.rollouts, rng))
                q_tallies[q.topic] += 1

            if config.mode == "prism":
                ids = [f"t{t}.s{step}.q{g}" for g in range(config.group_size)]
                vectors = {qid: q.vector for qid, q in zip(ids, batch)}
                scored, _m, cov = score_batch(
                    list(zip(ids, verdicts)), space, vectors, cov, rcfg
                )
                rewards = [s.reward for s in scored]
            elif config.mode == "zpd_only":
                rewards = [zpd_gate(solvability(v), rcfg) for v in verdicts]
            else:  # zpd_repetition
                factors = repetition_penalty([q.vector for q in batch])
                rewards = [
                    zpd_gate(solvability(v), rcfg) * f for v, f in zip(verdicts, factors)
                ]

            advs = advantages(rewards)
            samples = [(q.topic, a) for q, a in zip(batch, advs)]
            # several ascent epochs against the batch-sampling policy: the
            # ratio clip then caps how far one batch can move any topic's
            # probability, whatever the advantage scale
            ref = questioner.logits
            new_logits = ref
            for _ in range(config.epochs):
                new_logits = policy_step(new_logits, samples, pcfg, ref)
            if updates is not None:
                updates.append(
                    {
                        "iteration": t,
                        "step": step,
                        "topics": [q.topic for q in batch],
                        "p": [solvability(v) for v in verdicts],
                        "rewards": rewards,
                        "advantages": advs,
                        "logits_after": new_logits.tolist(),
                    }
                )
            questioner = replace(questioner, logits=new_logits)

        pool: list[tuple[int, float]] = []
        pool_hist = np.zeros(config.k_sim, dtype=np.int64)
        p_values: list[float] = []
        for i in range(config.pool_size):
            rng = _substream(config.seed, _PHASE_POOL, t, i)
            q = sample_question(questioner, world, rng)
            p = solvability(rollout_verdicts(solver, q, config.rollouts, rng))
            if rcfg.p_min <= p <= rcfg.p_max:
                pool.append((q.topic, q.difficulty))
                pool_hist[q.topic] += 1
                p_values.append(p)
        solver = train_solver(solver, pool)
        if config.mode == "prism":
            # fold the generated pool into the carried visit distribution: the
            # warm start hands the next iteration the distribution actually
            # observed, and the pool is by far its best-sampled estimate
            cov = update_batch(cov, pool_hist)
        leaving = cov.counts.copy()

        report = coverage_report(pool_hist) if pool_hist.sum() > 0 else _empty_report(config.k_sim)
        records.append(
            IterationRecord(
                iteration=t,
                report=report,
                pool_topic_counts=pool_hist,
                pool_size=len(pool),
                mean_p=float(np.mean(p_values)) if p_values else 0.0,
                questioner_topic_counts=q_tallies,
                coverage_entering=entering,
                coverage_leaving=leaving,
            )
        )

    return SimResult(
        config=config,
        world=world,
        records=records,
        questioner=questioner,
        solver=solver,
        coverage=cov if config.mode == "prism" else None,
        updates=updates,
    )


def metrics_csv(result: SimResult) -> str:
    """Per-iteration metrics table as CSV text."""
    lines = ["iteration,mode,active,entropy_bits,norm_entropy,gini,top10_share,pool_size,mean_p"]
    for rec in result.records:
        r = rec.report
        lines.append(
            f"{rec.iteration},{result.config.mode},{r.active_clusters},"
            f"{r.entropy_bits!r},{r.normalized_entropy!r},{r.gini!r},"
            f"{r.top10_share!r},{rec.pool_size},{rec.mean_p!r}"
        )
    return "\n".join(lines) + "\n"


def final_state_dict(result: SimResult) -> dict:
    """Final questioner/solver/coverage state for the run's output JSON."""
    return {
        "config": result.config.to_dict(),
        "iterations_run": len(result.records),
        "questioner_logits": result.questioner.logits.tolist(),
        "questioner_difficulty_offset": result.questioner.difficulty_offset.tolist(),
        "solver_skill": result.solver.skill.tolist(),
        "coverage_counts": None if result.coverage is None else result.coverage.counts.tolist(),
        "coverage_batches_seen": None if result.coverage is None else result.coverage.batches_seen,
        "topic_difficulty_mean": result.world.topic_difficulty_mean.tolist(),
    }
