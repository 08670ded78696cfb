"""Held-out scoring and decoding under frozen CRP predictive distributions.

After inference the counts are frozen; no customer is added while scoring.
The unigram model marginalizes segmentations with a forward pass over
positions (segment lengths unbounded); the bigram model runs over
(position, previous word) states with the previous word capped, keeping
the state space finite.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..lattice import Segmentation
from .base_dist import END_TOKEN, START_CONTEXT, BaseDist, base_logprob

NEG_INF = -np.inf


@dataclass
class UnigramPredictive:
    counts: Counter
    total: int
    alpha0: float
    p0: BaseDist

    def log_predictive(self, word) -> float:
        prior = self.alpha0 * math.exp(base_logprob(self.p0, word))
        return math.log(self.counts[word] + prior) - math.log(self.total + self.alpha0)


@dataclass
class BigramPredictive:
    customer_counts: dict  # (ctx, word) -> customers
    ctx_totals: Counter
    top_counts: Counter
    top_total: int
    alpha0: float
    alpha1: float
    p0: BaseDist

    def log_p_top(self, word) -> float:
        prior = self.alpha0 * math.exp(base_logprob(self.p0, word))
        return math.log(self.top_counts[word] + prior) - math.log(self.top_total + self.alpha0)

    def log_predictive(self, word, ctx) -> float:
        c = self.customer_counts.get((ctx, word), 0)
        prior = self.alpha1 * math.exp(self.log_p_top(word))
        return math.log(c + prior) - math.log(self.ctx_totals[ctx] + self.alpha1)


def _logaddexp(a: float, b: float) -> float:
    return float(np.logaddexp(a, b))


def unigram_sentence_loglik(pred: UnigramPredictive, ids) -> float:
    """Forward sum over all segmentations, terminator transition included."""
    n = len(ids)
    alpha = np.full(n + 1, NEG_INF)
    alpha[0] = 0.0
    for t in range(1, n + 1):
        for j in range(t):
            alpha[t] = _logaddexp(alpha[t], alpha[j] + pred.log_predictive(tuple(ids[j:t])))
    return float(alpha[n] + pred.log_predictive(END_TOKEN))


def unigram_viterbi(pred: UnigramPredictive, ids) -> Segmentation:
    n = len(ids)
    best = np.full(n + 1, NEG_INF)
    back = np.zeros(n + 1, dtype=int)
    best[0] = 0.0
    for t in range(1, n + 1):
        for j in range(t - 1, -1, -1):
            cand = best[j] + pred.log_predictive(tuple(ids[j:t]))
            if cand > best[t]:
                best[t] = cand
                back[t] = j
    bounds, t = [], n
    while t > 0:
        bounds.append(t)
        t = back[t]
    return Segmentation(tuple(reversed(bounds)))


def bigram_sentence_loglik(pred: BigramPredictive, ids, cap: int) -> float:
    """Forward over (position, previous word); words longer than the cap
    are unreachable, bounding the state space."""
    n = len(ids)
    layers: list[dict] = [dict() for _ in range(n + 1)]
    layers[0][START_CONTEXT] = 0.0
    for t in range(1, n + 1):
        for j in range(max(0, t - cap), t):
            word = tuple(ids[j:t])
            for prev, lw in layers[j].items():
                score = lw + pred.log_predictive(word, prev)
                cur = layers[t].get(word, NEG_INF)
                layers[t][word] = _logaddexp(cur, score)
    total = NEG_INF
    for word, lw in layers[n].items():
        total = _logaddexp(total, lw + pred.log_predictive(END_TOKEN, word))
    return float(total)


def bigram_viterbi(pred: BigramPredictive, ids, cap: int) -> Segmentation:
    n = len(ids)
    layers: list[dict] = [dict() for _ in range(n + 1)]
    layers[0][START_CONTEXT] = (0.0, None)
    for t in range(1, n + 1):
        for j in range(max(0, t - cap), t):
            word = tuple(ids[j:t])
            for prev, (lw, _) in layers[j].items():
                score = lw + pred.log_predictive(word, prev)
                if word not in layers[t] or score > layers[t][word][0]:
                    layers[t][word] = (score, (j, prev))
    best_word, best_score = None, NEG_INF
    for word, (lw, _) in layers[n].items():
        score = lw + pred.log_predictive(END_TOKEN, word)
        if score > best_score:
            best_score = score
            best_word = word
    bounds = []
    t, word = n, best_word
    while t > 0:
        bounds.append(t)
        t, word = layers[t][word][1]
    return Segmentation(tuple(reversed(bounds)))


def posterior_predictive_loglik(pred, sentences, cap: int | None = None) -> float:
    """Total held-out log-likelihood under a frozen predictive.

    Dispatches on the predictive flavor; an empty held-out set scores 0.
    """
    total = 0.0
    for ids in sentences:
        if isinstance(pred, BigramPredictive):
            total += bigram_sentence_loglik(pred, tuple(ids), cap or len(ids))
        else:
            total += unigram_sentence_loglik(pred, tuple(ids))
    return total


def map_segment_corpus(pred, sentences, cap: int | None = None) -> list[Segmentation]:
    out = []
    for ids in sentences:
        if isinstance(pred, BigramPredictive):
            out.append(bigram_viterbi(pred, tuple(ids), cap or len(ids)))
        else:
            out.append(unigram_viterbi(pred, tuple(ids)))
    return out
