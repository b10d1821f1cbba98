"""Coverage-regularised curriculum engine.

Semantic partitioning of a question embedding space, cross-batch EMA visit
tracking, ZPD-gated diversity rewards, group-relative policy math, coverage
diagnostics, and a deterministic co-evolution simulator.
"""

__version__ = "0.1.0"

from .clusters import ClusterSpace, assign, kmeans_fit, load_space, save_space
from .coverage import (
    CoverageState,
    init_state,
    load_state,
    rarity,
    save_state,
    update_batch,
    warm_start,
)
from .embedding import EmbeddingVector, QuestionRecord, cosine, load_corpus, normalize
from .grpo import (
    PolicyUpdateConfig,
    advantages,
    categorical_kl,
    clipped_term,
    policy_step,
    softmax,
    surrogate_objective,
)
from .metrics import CoverageReport, coverage_report, lorenz_csv
from .rewards import (
    RewardConfig,
    ScoredQuestion,
    final_reward,
    repetition_penalty,
    score_batch,
    solvability,
    zpd_gate,
)
from .simulator import (
    SimConfig,
    SimResult,
    SimWorld,
    generate_world,
    run_coevolution,
    sample_question,
    train_solver,
)

__all__ = [
    "__version__",
    "ClusterSpace",
    "CoverageReport",
    "CoverageState",
    "EmbeddingVector",
    "PolicyUpdateConfig",
    "QuestionRecord",
    "RewardConfig",
    "ScoredQuestion",
    "SimConfig",
    "SimResult",
    "SimWorld",
    "advantages",
    "assign",
    "categorical_kl",
    "clipped_term",
    "cosine",
    "coverage_report",
    "final_reward",
    "generate_world",
    "init_state",
    "kmeans_fit",
    "load_corpus",
    "load_space",
    "load_state",
    "lorenz_csv",
    "normalize",
    "policy_step",
    "rarity",
    "repetition_penalty",
    "run_coevolution",
    "sample_question",
    "save_space",
    "save_state",
    "score_batch",
    "softmax",
    "solvability",
    "surrogate_objective",
    "train_solver",
    "update_batch",
    "warm_start",
    "zpd_gate",
]
