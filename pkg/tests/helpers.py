"""Shared oracles: finite differences, segmentation enumeration, tiny models."""

from __future__ import annotations

import itertools

import numpy as np

from seglm.corpus import Lexicon, Sentence, Vocab
from seglm.model import ModelConfig, SegmentalLM


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def finite_difference_grads(f, store, eps: float = 1e-5) -> dict[str, np.ndarray]:
    """Central finite differences of the scalar closure f() w.r.t. each array.

    Mutates parameter entries in place and restores them, so f must read
    current values on every call.
    """
    grads = {}
    for name, node in store.params.items():
        g = np.zeros_like(node.data)
        flat = node.data.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = f()
            flat[i] = orig - eps
            lo = f()
            flat[i] = orig
            gf[i] = (hi - lo) / (2.0 * eps)
        grads[name] = g
    return grads


def max_grad_relative_error(analytic: dict, numeric: dict) -> float:
    worst = 0.0
    for name, g in analytic.items():
        fd = numeric[name]
        denom = max(1.0, float(np.max(np.abs(g))), float(np.max(np.abs(fd))))
        worst = max(worst, float(np.max(np.abs(g - fd))) / denom)
    return worst


def enumerate_segmentations(n: int, cap: int):
    """Every tuple of segment end positions with all lengths <= cap."""
    results = []

    def extend(prefix, pos):
        if pos == n:
            results.append(tuple(prefix))
            return
        for length in range(1, min(cap, n - pos) + 1):
            prefix.append(pos + length)
            extend(prefix, pos + length)
            prefix.pop()

    extend([], 0)
    return results


def brute_force_summary(model, ids, beta: float = 2.0):
    """Enumeration oracle: marginal, argmax, and expected powered length.

    Scores each candidate segmentation with the per-segment reference
    operations (a separate code path from the batched scorer) and combines
    them directly in probability space via logsumexp.
    """
    from seglm.numeric import autodiff as ad

    n = len(ids)
    cap = min(model.config.max_seg_len, n)
    with ad.no_grad():
        hist = model.encode_history(ids)
        edge = {}
        for start in range(n):
            h = hist.row(start)
            for length in range(1, min(cap, n - start) + 1):
                seg = tuple(ids[start : start + length])
                edge[(start, length)] = float(model.segment_logprob(h, seg).data)
        terminal = float(model.segment_logprob(hist.row(n), (), terminal=True).data)

    seg_scores = []
    for bounds in enumerate_segmentations(n, cap):
        total, prev = terminal, 0
        stat = 0.0
        for b in bounds:
            total += edge[(prev, b - prev)]
            stat += float(b - prev) ** beta
            prev = b
        seg_scores.append((bounds, total, stat))

    logps = np.array([s for _, s, _ in seg_scores])
    m = logps.max()
    marginal = m + np.log(np.exp(logps - m).sum())
    posterior = np.exp(logps - marginal)
    expected_stat = float(np.sum(posterior * np.array([st for _, _, st in seg_scores])))
    best_idx = int(np.argmax(logps))
    return {
        "marginal": float(marginal),
        "best_bounds": seg_scores[best_idx][0],
        "best_score": float(logps[best_idx]),
        "expected_stat": expected_stat,
        "all": seg_scores,
    }


def tiny_model(n_chars=2, embed=3, hidden=4, cap=3, lexicon_entries=(), seed=0,
               context_dim=0, dropout=0.0) -> SegmentalLM:
    entries = tuple(sorted(tuple(e) for e in lexicon_entries))
    lex = Lexicon(entries=entries, counts=tuple(1 for _ in entries),
                  max_len=cap, min_freq=1)
    config = ModelConfig(n_chars=n_chars, embed_size=embed, hidden_size=hidden,
                         max_seg_len=cap, context_dim=context_dim, dropout=dropout)
    return SegmentalLM(config, lex, np.random.default_rng(seed))


def zero_model(**kwargs) -> SegmentalLM:
    m = tiny_model(**kwargs)
    for node in m.store.params.values():
        node.data[...] = 0.0
    return m


def all_sentences(n_chars: int, length: int):
    return list(itertools.product(range(n_chars), repeat=length))


def make_sentence(text: str, vocab: Vocab, boundaries=frozenset()) -> Sentence:
    return Sentence(vocab.encode(text), frozenset(boundaries))
