"""Character-level LSTM language model and the surprisal-peak segmenter.

The LM conditions the first character on the end-of-sequence embedding (the
carrier of "a sentence starts here") and predicts characters plus the
terminator; the end-of-word symbol is masked out of its output. It serves
both as the pure language-modeling baseline and as the surprisal source
for the deterministic segmenter, which puts a boundary wherever the
per-character surprisal spikes above both neighbors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lattice import Segmentation
from ..numeric import autodiff as ad
from ..numeric.nn import LSTMParams, ParamStore, dropout, init_params, lstm_step


@dataclass
class CharLMConfig:
    n_chars: int
    embed_size: int = 512
    hidden_size: int = 512
    dropout: float = 0.5

    def to_meta(self) -> dict:
        return {
            "n_chars": self.n_chars,
            "embed_size": self.embed_size,
            "hidden_size": self.hidden_size,
            "dropout": self.dropout,
        }


class CharLM:
    def __init__(self, config: CharLMConfig, rng: np.random.Generator):
        self.config = config
        self.store = ParamStore()
        n_sym = config.n_chars + 2
        e, h = config.embed_size, config.hidden_size
        self.store.add("embed", init_params((n_sym, e), rng))
        self.store.add("lstm.wx", init_params((e, 4 * h), rng))
        self.store.add("lstm.wh", init_params((h, 4 * h), rng))
        self.store.add("lstm.b", init_params((4 * h,), rng))
        self.store.add("out.w", init_params((h, n_sym), rng))
        self.store.add("out.b", init_params((n_sym,), rng))
        self.end_word_id = config.n_chars
        self.end_seq_id = config.n_chars + 1
        self._mask = np.zeros(n_sym)
        self._mask[self.end_word_id] = -np.inf

    def _lstm(self) -> LSTMParams:
        s = self.store
        return LSTMParams(s["lstm.wx"], s["lstm.wh"], s["lstm.b"])

    def _step_logprobs(self, ids, train: bool, rng) -> ad.Node:
        """(n+1, V) log-distributions: row t predicts position t's symbol."""
        inputs = np.asarray([self.end_seq_id] + list(ids))
        emb = dropout(ad.rows(self.store["embed"], inputs),
                      self.config.dropout, train, rng)
        h = ad.constant(np.zeros((1, self.config.hidden_size)))
        c = ad.constant(np.zeros((1, self.config.hidden_size)))
        lstm = self._lstm()
        hiddens = []
        for t in range(len(inputs)):
            h, c = lstm_step(lstm, ad.rows(emb, np.asarray([t])), h, c)
            hiddens.append(h)
        stacked = dropout(ad.concat(hiddens, axis=0), self.config.dropout, train, rng)
        logits = ad.add(ad.matmul(stacked, self.store["out.w"]), self.store["out.b"])
        return ad.log_softmax(ad.add(logits, ad.constant(self._mask)), axis=-1)

    def sentence_loss(self, ids, train: bool = False, rng=None) -> ad.Node:
        """Negative log-likelihood of the characters plus the terminator."""
        ids = tuple(ids)
        ls = self._step_logprobs(ids, train, rng)
        targets = np.asarray(list(ids) + [self.end_seq_id])
        picked = ad.gather_pairs(ls, np.arange(len(targets)), targets)
        return ad.neg(ad.sum_all(picked))

    def sentence_loglik(self, ids) -> float:
        with ad.no_grad():
            return -float(self.sentence_loss(ids).data)

    def surprisals(self, ids) -> np.ndarray:
        """Per-character -log p(x_t | x_<t), terminator excluded."""
        ids = tuple(ids)
        with ad.no_grad():
            ls = self._step_logprobs(ids, train=False, rng=None)
        return -ls.data[np.arange(len(ids)), np.asarray(ids)]


def boundaries_from_surprisals(surprisal: np.ndarray) -> frozenset[int]:
    """Internal boundaries at strict local maxima of the surprisal curve.

    A boundary lands before position t (1-based) when surprisal(t) exceeds
    its left neighbor and, unless t is the last position, its right
    neighbor too. The first position never yields an internal boundary.
    """
    s = np.asarray(surprisal, dtype=np.float64)
    n = len(s)
    out = set()
    for t in range(2, n + 1):
        left_ok = s[t - 1] > s[t - 2]
        right_ok = t == n or s[t - 1] > s[t]
        if left_ok and right_ok:
            out.add(t - 1)
    return frozenset(out)


def surprisal_segment(char_lm, sentence) -> Segmentation:
    """Deterministic segmentation of one sentence by surprisal peaks."""
    ids = tuple(sentence.ids) if hasattr(sentence, "ids") else tuple(sentence)
    bounds = boundaries_from_surprisals(char_lm.surprisals(ids))
    return Segmentation(tuple(sorted(bounds | {len(ids)})))
