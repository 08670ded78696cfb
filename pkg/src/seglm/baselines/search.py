"""Empirical-Bayes hyperparameter selection for the DP/HDP segmenters.

Every grid point gets a full annealed inference run with its own seeded
generator; the winner is the point whose frozen posterior predictive
assigns the highest likelihood to the held-out split. Degenerate points
(probabilities at 0 or 1) score -inf instead of crashing so a partly bad
grid still selects its best member.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .base_dist import BaseDist
from .crp import AnnealSchedule, BigramState, UnigramState, run_annealed_inference
from .predictive import posterior_predictive_loglik


@dataclass
class GridPoint:
    config: dict
    heldout_loglik: float
    result: object = None


def empirical_bayes_search(
    grid: list[dict],
    train_sentences,
    heldout_sentences,
    kind: str,
    n_chars: int,
    schedule: AnnealSchedule,
    seed: int,
    cap: int | None = None,
    log_file=None,
) -> GridPoint:
    """Run annealed inference per grid point and keep the held-out argmax.

    ``kind`` is 'dp' (unigram) or 'hdp' (bigram). Each point's config needs
    alpha0, p_end, p_continue, plus alpha1 for 'hdp'. All points are logged
    as JSON lines when ``log_file`` is given.
    """
    if kind not in ("dp", "hdp"):
        raise ValueError(f"unknown baseline kind {kind!r}")
    if not grid:
        raise ValueError("empty hyperparameter grid")
    points = []
    for i, config in enumerate(grid):
        rng = np.random.default_rng([seed, i])
        try:
            p0 = BaseDist(config["p_end"], config["p_continue"], n_chars)
            if kind == "dp":
                state = UnigramState(train_sentences, p0, config["alpha0"], rng)
            else:
                state = BigramState(
                    train_sentences, p0, config["alpha0"], config["alpha1"], rng
                )
            result = run_annealed_inference(state, schedule, rng)
            loglik = posterior_predictive_loglik(
                result.best_predictive, heldout_sentences, cap
            )
        except ValueError:
            result, loglik = None, -np.inf
        points.append(GridPoint(dict(config), float(loglik), result))
        if log_file is not None:
            log_file.write(
                json.dumps(
                    {
                        "config": config,
                        "heldout_loglik": float(loglik),
                        "seed": [seed, i],
                        "iterations": schedule.iterations,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    return max(points, key=lambda p: p.heldout_loglik)
