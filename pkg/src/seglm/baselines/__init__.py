"""Comparison systems: DP/HDP Gibbs segmenters and the surprisal baseline."""

from .base_dist import END_TOKEN, START_CONTEXT, BaseDist, base_logprob
from .charlm import CharLM, CharLMConfig, boundaries_from_surprisals, surprisal_segment
from .crp import (
    AnnealSchedule,
    BigramState,
    InferenceResult,
    StateError,
    UnigramState,
    gibbs_boundary_sweep,
    run_annealed_inference,
)
from .predictive import (
    BigramPredictive,
    UnigramPredictive,
    map_segment_corpus,
    posterior_predictive_loglik,
)
from .search import GridPoint, empirical_bayes_search

__all__ = [
    "END_TOKEN",
    "START_CONTEXT",
    "BaseDist",
    "base_logprob",
    "CharLM",
    "CharLMConfig",
    "boundaries_from_surprisals",
    "surprisal_segment",
    "AnnealSchedule",
    "BigramState",
    "InferenceResult",
    "StateError",
    "UnigramState",
    "gibbs_boundary_sweep",
    "run_annealed_inference",
    "BigramPredictive",
    "UnigramPredictive",
    "map_segment_corpus",
    "posterior_predictive_loglik",
    "GridPoint",
    "empirical_bayes_search",
]
