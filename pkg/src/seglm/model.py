"""Segmental language model: history encoder, segment generators, mixture gate.

A segment starting after ``s`` prefix characters is scored from the hidden
state summarizing exactly those characters. Two generators share that
state: a character-level LSTM that can produce any nonempty string followed
by the end-of-word symbol, and a key-value memory that emits whole stored
segments in one event. A sigmoid gate mixes them. Sentence termination is a
distinguished event: the character generator emitting the end-of-sequence
symbol as its sole output, allowed only on the lattice-final transition
(everywhere else the first generation step masks that symbol out).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .corpus import Lexicon
from .numeric import autodiff as ad
from .numeric.nn import LSTMParams, MLPParams, ParamStore, dropout, init_params, lstm_step, mlp

NEG_INF = -np.inf


@dataclass
class ModelConfig:
    n_chars: int
    embed_size: int = 512
    hidden_size: int = 512
    max_seg_len: int = 10
    context_dim: int = 0
    dropout: float = 0.5

    def to_meta(self) -> dict:
        return {
            "n_chars": self.n_chars,
            "embed_size": self.embed_size,
            "hidden_size": self.hidden_size,
            "max_seg_len": self.max_seg_len,
            "context_dim": self.context_dim,
            "dropout": self.dropout,
        }


def lexicon_hash(lexicon: Lexicon) -> str:
    h = hashlib.sha256()
    h.update(f"L={lexicon.max_len};F={lexicon.min_freq};".encode())
    for entry in lexicon.entries:
        h.update(",".join(map(str, entry)).encode())
        h.update(b";")
    return h.hexdigest()


@dataclass
class HistoryStates:
    """Hidden vectors for every boundary position of one sentence.

    Row ``s`` of ``stacked`` summarizes the first ``s`` characters, so there
    are n+1 rows; row 0 comes from the zero state.
    """

    stacked: ad.Node

    def row(self, s: int) -> ad.Node:
        return ad.rows(self.stacked, np.asarray([s]))

    def __len__(self) -> int:
        return self.stacked.data.shape[0]


class SegmentalLM:
    """Parameter owner plus all segment-scoring operations."""

    def __init__(self, config: ModelConfig, lexicon: Lexicon, rng: np.random.Generator):
        if lexicon.entries and lexicon.max_len != config.max_seg_len:
            raise ValueError(
                f"lexicon max_len {lexicon.max_len} != model cap {config.max_seg_len}"
            )
        self.config = config
        self.lexicon = lexicon
        self.store = ParamStore()
        n_sym = config.n_chars + 2
        e, h = config.embed_size, config.hidden_size
        enc_in = e + config.context_dim
        add = lambda name, shape: self.store.add(name, init_params(shape, rng))

        add("embed", (n_sym, e))
        add("enc.wx", (enc_in, 4 * h))
        add("enc.wh", (h, 4 * h))
        add("enc.b", (4 * h,))
        add("gen.wx", (e, 4 * h))
        add("gen.wh", (h, 4 * h))
        add("gen.b", (4 * h,))
        add("init.w", (h, h))
        add("init.b", (h,))
        add("out.w", (h, n_sym))
        add("out.b", (n_sym,))
        if len(lexicon) > 0:
            add("memq.w1", (h, h))
            add("memq.b1", (h,))
            add("memq.w2", (h, h))
            add("memq.b2", (h,))
            add("mem.keys", (len(lexicon), h))
            add("mem.bias", (len(lexicon),))
            add("gate.w1", (h, h))
            add("gate.b1", (h,))
            add("gate.w2", (h, 1))
            add("gate.b2", (1,))
        if config.context_dim > 0:
            add("att.w", (h, config.context_dim))

        self.end_word_id = config.n_chars
        self.end_seq_id = config.n_chars + 1
        # Added to first-step logits of non-terminal segments.
        self._first_step_mask = np.zeros(n_sym)
        self._first_step_mask[self.end_seq_id] = NEG_INF

    # -- parameter plumbing -------------------------------------------------

    @property
    def has_memory(self) -> bool:
        return len(self.lexicon) > 0

    def _enc_lstm(self) -> LSTMParams:
        s = self.store
        return LSTMParams(s["enc.wx"], s["enc.wh"], s["enc.b"])

    def _gen_lstm(self) -> LSTMParams:
        s = self.store
        return LSTMParams(s["gen.wx"], s["gen.wh"], s["gen.b"])

    def _memq_mlp(self) -> MLPParams:
        s = self.store
        return MLPParams(s["memq.w1"], s["memq.b1"], s["memq.w2"], s["memq.b2"])

    def _gate_mlp(self) -> MLPParams:
        s = self.store
        return MLPParams(s["gate.w1"], s["gate.b1"], s["gate.w2"], s["gate.b2"])

    def _drop(self, x, train, rng):
        return dropout(x, self.config.dropout, train, rng)

    # -- history ------------------------------------------------------------

    def encode_history(self, sentence, context: np.ndarray | None = None,
                       train: bool = False, rng: np.random.Generator | None = None) -> HistoryStates:
        """Run the encoder over the sentence, one hidden row per boundary.

        With conditioning vectors present, each step's input is the
        character embedding concatenated with an attention-weighted sum of
        the vectors; the attention query is a projection of the previous
        hidden state.
        """
        ids = _ids_of(sentence)
        if context is None and self.config.context_dim > 0:
            raise ValueError("model was built for conditioning but no context given")
        if context is not None:
            context = np.asarray(context, dtype=np.float64)
            if self.config.context_dim == 0:
                raise ValueError("model was built without conditioning")
            if context.ndim != 2 or context.shape[1] != self.config.context_dim:
                raise ValueError(
                    f"context must be (R, {self.config.context_dim}), got {context.shape}"
                )
        h_size = self.config.hidden_size
        enc = self._enc_lstm()
        emb = self._drop(ad.rows(self.store["embed"], np.asarray(ids)), train, rng)
        h = ad.constant(np.zeros((1, h_size)))
        c = ad.constant(np.zeros((1, h_size)))
        states = [h]
        ctx_node = ad.constant(context) if context is not None else None
        for t in range(len(ids)):
            x = ad.rows(emb, np.asarray([t]))
            if ctx_node is not None:
                query = ad.matmul(h, self.store["att.w"])
                scores = ad.matmul(query, ad.transpose(ctx_node))
                weights = ad.exp(ad.log_softmax(scores, axis=-1))
                attended = ad.matmul(weights, ctx_node)
                x = ad.concat([x, attended], axis=1)
            h, c = lstm_step(enc, x, h, c)
            states.append(h)
        return HistoryStates(ad.concat(states, axis=0))

    def attention_weights(self, h: ad.Node, context: np.ndarray) -> np.ndarray:
        """Attention distribution over the context rows for one query state."""
        ctx = ad.constant(np.asarray(context, dtype=np.float64))
        query = ad.matmul(h, self.store["att.w"])
        scores = ad.matmul(query, ad.transpose(ctx))
        return np.exp(ad.log_softmax(scores, axis=-1).data[0])

    # -- per-segment scoring (reference path) --------------------------------

    def char_segment_logprob(self, h_t: ad.Node, segment, terminal: bool = False,
                             train: bool = False, rng=None) -> ad.Node:
        """Chain-rule score of one segment from the character generator.

        Non-terminal segments emit their characters then the end-of-word
        symbol; the distinguished terminal event emits end-of-sequence as
        the sole symbol from the unmasked first-step distribution.
        """
        h0 = ad.add(ad.matmul(self._drop(h_t, train, rng), self.store["init.w"]),
                    self.store["init.b"])
        logits = ad.add(ad.matmul(self._drop(h0, train, rng), self.store["out.w"]),
                        self.store["out.b"])
        if terminal:
            return ad.take(ad.log_softmax(logits, axis=-1), (0, self.end_seq_id))
        segment = tuple(segment)
        if not segment:
            raise ValueError("segments must contain at least one character")
        if any(i >= self.config.n_chars for i in segment):
            raise ValueError("segment contains reserved symbols")
        masked = ad.add(logits, ad.constant(self._first_step_mask))
        total = ad.take(ad.log_softmax(masked, axis=-1), (0, segment[0]))
        h, c = h0, ad.constant(np.zeros((1, self.config.hidden_size)))
        gen = self._gen_lstm()
        for k, char_id in enumerate(segment):
            x = self._drop(ad.rows(self.store["embed"], np.asarray([char_id])), train, rng)
            h, c = lstm_step(gen, x, h, c)
            logits = ad.add(ad.matmul(self._drop(h, train, rng), self.store["out.w"]),
                            self.store["out.b"])
            ls = ad.log_softmax(logits, axis=-1)
            next_id = segment[k + 1] if k + 1 < len(segment) else self.end_word_id
            total = ad.add(total, ad.take(ls, (0, next_id)))
        return total

    def lex_segment_logprob(self, h_t: ad.Node, segment,
                            train: bool = False, rng=None) -> ad.Node:
        """Memory branch: log softmax mass on the matching entry, else -inf."""
        idx = self.lexicon.index_of(tuple(segment))
        if idx is None or not self.has_memory:
            return ad.constant(NEG_INF)
        q = mlp(self._memq_mlp(), self._drop(h_t, train, rng))
        logits = ad.add(ad.matmul(q, ad.transpose(self.store["mem.keys"])),
                        self.store["mem.bias"])
        return ad.take(ad.log_softmax(logits, axis=-1), (0, idx))

    def gate_logs(self, h_t: ad.Node, train: bool = False, rng=None):
        """(log g, log(1-g)) for the character-generator mixture weight.

        Both sides come from softplus so they stay finite far into the
        saturated regime. An empty memory hard-wires g to 1.
        """
        if not self.has_memory:
            return ad.constant(0.0), ad.constant(NEG_INF)
        z = mlp(self._gate_mlp(), self._drop(h_t, train, rng))
        z0 = ad.take(z, (0, 0))
        return ad.neg(ad.softplus(ad.neg(z0))), ad.neg(ad.softplus(z0))

    def segment_logprob(self, h_t: ad.Node, segment, terminal: bool = False,
                        train: bool = False, rng=None) -> ad.Node:
        """Gated mixture of the two generators for one segment.

        The terminal event is scored by the character branch alone (the
        memory stores no terminator), still weighted by the gate.
        """
        log_g, log_1mg = self.gate_logs(h_t, train, rng)
        char_lp = ad.add(log_g, self.char_segment_logprob(h_t, segment, terminal, train, rng))
        if terminal or not self.has_memory:
            return char_lp
        idx = self.lexicon.index_of(tuple(segment))
        if idx is None:
            return char_lp
        lex_lp = ad.add(log_1mg, self.lex_segment_logprob(h_t, segment, train, rng))
        return ad.logaddexp(char_lp, lex_lp)

    # -- batched scoring for the lattice -------------------------------------

    def score_segments(self, sentence, context: np.ndarray | None = None,
                       train: bool = False, rng: np.random.Generator | None = None) -> "SegmentScores":
        """Score every candidate segment of one sentence in a few batched passes.

        Returns, for each length l, the mixed log-probabilities of all
        segments of that length (indexed by start position), plus the
        terminal-event score from the full-history state. Equivalent to
        calling the per-segment operations edge by edge.
        """
        ids = _ids_of(sentence)
        n = len(ids)
        cap = min(self.config.max_seg_len, n)
        hist = self.encode_history(sentence, context, train, rng)
        h_drop = self._drop(hist.stacked, train, rng)

        # Generator initial hiddens for all n+1 boundary positions.
        g0_all = ad.add(ad.matmul(h_drop, self.store["init.w"]), self.store["init.b"])
        logits0 = ad.add(ad.matmul(self._drop(g0_all, train, rng), self.store["out.w"]),
                         self.store["out.b"])
        ls0_unmasked = ad.log_softmax(logits0, axis=-1)
        ls0_masked = ad.log_softmax(ad.add(logits0, ad.constant(self._first_step_mask)), axis=-1)
        terminal_char = ad.take(ls0_unmasked, (n, self.end_seq_id))

        # Batched generator rollout from starts 0..n-1.
        arange_n = np.arange(n)
        padded = np.zeros((cap, n), dtype=np.intp)
        valid_starts = {}
        for k in range(cap):
            cols = np.minimum(arange_n + k, n - 1)
            padded[k] = np.asarray(ids)[cols]
            valid_starts[k] = n - k  # starts s with s+k < n
        gen = self._gen_lstm()
        h = ad.rows(g0_all, arange_n)
        c = ad.constant(np.zeros((n, self.config.hidden_size)))
        step_ls = [ad.rows(ls0_masked, arange_n)]
        for k in range(cap):
            x = self._drop(ad.rows(self.store["embed"], padded[k]), train, rng)
            h, c = lstm_step(gen, x, h, c)
            logits_k = ad.add(ad.matmul(self._drop(h, train, rng), self.store["out.w"]),
                              self.store["out.b"])
            step_ls.append(ad.log_softmax(logits_k, axis=-1))

        # Cumulative character chains, then per-length end-of-word closure.
        char_by_len: dict[int, ad.Node] = {}
        cum = ad.constant(np.zeros(n))
        end_col = np.full(n, self.end_word_id, dtype=np.intp)
        for l in range(1, cap + 1):
            cum = ad.add(cum, ad.gather_pairs(step_ls[l - 1], arange_n, padded[l - 1]))
            closed = ad.add(cum, ad.gather_pairs(step_ls[l], arange_n, end_col))
            char_by_len[l] = ad.rows(closed, np.arange(n - l + 1))

        # Memory branch and gate, shared across all lengths.
        if self.has_memory:
            q = mlp(self._memq_mlp(), h_drop)
            mem_logits = ad.add(ad.matmul(q, ad.transpose(self.store["mem.keys"])),
                                self.store["mem.bias"])
            mem_ls = ad.log_softmax(mem_logits, axis=-1)
            z = mlp(self._gate_mlp(), h_drop)
            z1 = ad.reshape(z, (n + 1,))
            log_g = ad.neg(ad.softplus(ad.neg(z1)))
            log_1mg = ad.neg(ad.softplus(z1))
        else:
            mem_ls = None
            log_g = ad.constant(np.zeros(n + 1))
            log_1mg = ad.constant(np.full(n + 1, NEG_INF))

        mix_by_len: dict[int, ad.Node] = {}
        for l in range(1, cap + 1):
            starts = np.arange(n - l + 1)
            char_side = ad.add(ad.rows(log_g, starts), char_by_len[l])
            if mem_ls is not None and l >= 2:
                rows_idx, cols_idx, hit_starts = [], [], []
                for s in range(n - l + 1):
                    idx = self.lexicon.index_of(tuple(ids[s : s + l]))
                    if idx is not None:
                        rows_idx.append(s)
                        cols_idx.append(idx)
                        hit_starts.append(s)
                if rows_idx:
                    hits = ad.gather_pairs(mem_ls, np.asarray(rows_idx), np.asarray(cols_idx))
                    lex_full = ad.scatter_to_full(hits, np.asarray(hit_starts), n - l + 1)
                    lex_side = ad.add(ad.rows(log_1mg, starts), lex_full)
                    mix_by_len[l] = ad.logaddexp(char_side, lex_side)
                    continue
            mix_by_len[l] = char_side
        terminal = ad.add(ad.take(log_g, n), terminal_char)
        return SegmentScores(n=n, cap=cap, mix_by_len=mix_by_len, terminal=terminal,
                             char_by_len=char_by_len, log_g=log_g, log_1mg=log_1mg)


@dataclass
class SegmentScores:
    """All segment scores of one sentence, grouped by segment length."""

    n: int
    cap: int
    mix_by_len: dict[int, ad.Node]
    terminal: ad.Node
    char_by_len: dict[int, ad.Node] = field(default_factory=dict)
    log_g: ad.Node | None = None
    log_1mg: ad.Node | None = None

    def edge(self, start: int, length: int) -> ad.Node:
        """Mixed log-probability of the segment [start, start+length)."""
        return ad.take(self.mix_by_len[length], start)

    def edge_value(self, start: int, length: int) -> float:
        return float(self.mix_by_len[length].data[start])


def _ids_of(sentence):
    return tuple(sentence.ids) if hasattr(sentence, "ids") else tuple(sentence)
