"""Seating statistics and Gibbs boundary sampling for the DP/HDP segmenters.

The unigram model needs only customer counts: a Dirichlet process with a
fixed base has the usual count-ratio predictive. The bigram model keeps one
restaurant per conditioning word with explicit table sizes; each table is
one customer of the top-level process over the word base. Boundary moves
are blocked Gibbs updates: the affected customers are removed, both
boundary hypotheses are scored exactly (for the bigram model by summing
over every seating of the reinserted customers), the choice is annealed,
and the winner is reinserted with a sampled seating.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .base_dist import END_TOKEN, START_CONTEXT, BaseDist, base_logprob


class StateError(RuntimeError):
    """Seating bookkeeping diverged from the boundary assignment."""


@dataclass
class AnnealSchedule:
    """Linear decay from t_start to 1.0 over the first half, then flat 1.0."""

    iterations: int = 1000
    t_start: float = 2.0

    def temperature(self, iteration: int) -> float:
        half = max(1, self.iterations // 2)
        if iteration >= half:
            return 1.0
        frac = iteration / half
        return self.t_start + (1.0 - self.t_start) * frac

    def __post_init__(self):
        if self.temperature(self.iterations - 1) != 1.0:
            raise ValueError("schedule must end at temperature 1")


def _words_of(ids, boundaries):
    bounds = sorted(boundaries) + [len(ids)]
    words, prev = [], 0
    for b in bounds:
        words.append(tuple(ids[prev:b]))
        prev = b
    return words


def _log_rising(a: float, n: int) -> float:
    return math.lgamma(a + n) - math.lgamma(a)


# ---------------------------------------------------------------------------
# unigram Dirichlet-process state


class UnigramState:
    """Token counts plus the current segmentation of every sentence."""

    def __init__(self, sentences, p0: BaseDist, alpha0: float, rng: np.random.Generator,
                 init_boundaries=None):
        self.sentences = [tuple(s) for s in sentences]
        self.p0 = p0
        self.alpha0 = float(alpha0)
        self.counts: Counter = Counter()
        self.total = 0
        if init_boundaries is None:
            self.boundaries = [
                set(np.flatnonzero(rng.random(len(s) - 1) < 0.5) + 1)
                for s in self.sentences
            ]
        else:
            self.boundaries = [set(b) for b in init_boundaries]
        for s, b in zip(self.sentences, self.boundaries):
            for w in _words_of(s, b) + [END_TOKEN]:
                self._insert(w)

    def _insert(self, word):
        self.counts[word] += 1
        self.total += 1

    def _remove(self, word):
        if self.counts[word] <= 0:
            raise StateError(f"removing absent word {word!r}")
        self.counts[word] -= 1
        if self.counts[word] == 0:
            del self.counts[word]
        self.total -= 1

    def predictive(self, word, extra: Counter | None = None, extra_total: int = 0) -> float:
        c = self.counts[word] + (extra[word] if extra else 0)
        prior = self.alpha0 * math.exp(base_logprob(self.p0, word))
        return (c + prior) / (self.total + extra_total + self.alpha0)

    def log_joint(self) -> float:
        """Exchangeable log-probability of all tokens under the process."""
        total = -_log_rising(self.alpha0, self.total)
        for word, c in self.counts.items():
            prior = self.alpha0 * math.exp(base_logprob(self.p0, word))
            for j in range(c):
                total += math.log(j + prior)
        return total

    def rebuilt_counts(self) -> Counter:
        fresh: Counter = Counter()
        for s, b in zip(self.sentences, self.boundaries):
            for w in _words_of(s, b) + [END_TOKEN]:
                fresh[w] += 1
        return fresh

    def snapshot(self):
        from .predictive import UnigramPredictive

        return UnigramPredictive(Counter(self.counts), self.total, self.alpha0, self.p0)

    def check_consistency(self) -> None:
        if self.rebuilt_counts() != self.counts:
            raise StateError("incremental counts diverged from the boundary assignment")
        if sum(self.counts.values()) != self.total:
            raise StateError("total customers != total tokens")

    # -- one boundary decision ------------------------------------------------

    def resample_position(self, sent_idx: int, pos: int, temperature: float,
                          rng: np.random.Generator) -> None:
        ids = self.sentences[sent_idx]
        bounds = self.boundaries[sent_idx]
        left = max([0] + [b for b in bounds if b < pos])
        right = min([len(ids)] + [b for b in bounds if b > pos])
        whole = tuple(ids[left:right])
        first = tuple(ids[left:pos])
        second = tuple(ids[pos:right])

        if pos in bounds:
            self._remove(first)
            self._remove(second)
        else:
            self._remove(whole)

        p_merge = self.predictive(whole)
        extra = Counter({first: 1})
        p_split = self.predictive(first) * self.predictive(second, extra, 1)

        a = p_merge ** (1.0 / temperature)
        b = p_split ** (1.0 / temperature)
        split = rng.random() < b / (a + b)
        if split:
            bounds.add(pos)
            self._insert(first)
            self._insert(second)
        else:
            bounds.discard(pos)
            self._insert(whole)


# ---------------------------------------------------------------------------
# bigram hierarchical state


class BigramState:
    """Per-context restaurants with explicit tables over a shared word level.

    ``tables[ctx][word]`` is the list of table sizes; every table also
    counts as one customer of the top-level process, whose base is ``p0``.
    Removal picks a table proportional to its size (customers of one word
    in one context are exchangeable), so no per-token table identity needs
    to be stored.
    """

    def __init__(self, sentences, p0: BaseDist, alpha0: float, alpha1: float,
                 rng: np.random.Generator, init_boundaries=None):
        self.sentences = [tuple(s) for s in sentences]
        self.p0 = p0
        self.alpha0 = float(alpha0)
        self.alpha1 = float(alpha1)
        self.tables: dict = {}
        self.n_ctx: Counter = Counter()
        self.top_counts: Counter = Counter()
        self.top_total = 0
        if init_boundaries is None:
            self.boundaries = [
                set(np.flatnonzero(rng.random(len(s) - 1) < 0.5) + 1)
                for s in self.sentences
            ]
        else:
            self.boundaries = [set(b) for b in init_boundaries]
        for s, b in zip(self.sentences, self.boundaries):
            for ctx, word in self._bigrams(s, b):
                self.insert(ctx, word, rng)

    @staticmethod
    def _bigrams(ids, boundaries):
        words = _words_of(ids, boundaries)
        chain = [START_CONTEXT] + words + [END_TOKEN]
        return [(chain[i], chain[i + 1]) for i in range(len(chain) - 1)]

    def p_top(self, word) -> float:
        prior = self.alpha0 * math.exp(base_logprob(self.p0, word))
        return (self.top_counts[word] + prior) / (self.top_total + self.alpha0)

    def predictive(self, word, ctx) -> float:
        sizes = self.tables.get(ctx, {}).get(word, [])
        return (sum(sizes) + self.alpha1 * self.p_top(word)) / (self.n_ctx[ctx] + self.alpha1)

    def insert(self, ctx, word, rng: np.random.Generator) -> float:
        """Seat one customer, sampling the table; returns the seat probability
        factor (numerator choice over the restaurant normalizer)."""
        words = self.tables.setdefault(ctx, {})
        sizes = words.setdefault(word, [])
        new_weight = self.alpha1 * self.p_top(word)
        weights = np.asarray(sizes + [new_weight], dtype=np.float64)
        denom = self.n_ctx[ctx] + self.alpha1
        choice = int(rng.choice(len(weights), p=weights / weights.sum()))
        if choice == len(sizes):
            sizes.append(1)
            self.top_counts[word] += 1
            self.top_total += 1
        else:
            sizes[choice] += 1
        self.n_ctx[ctx] += 1
        return float(weights[choice] / denom)

    def remove(self, ctx, word, rng: np.random.Generator) -> None:
        words = self.tables.get(ctx, {})
        sizes = words.get(word, [])
        if not sizes:
            raise StateError(f"removing absent customer {word!r} in context {ctx!r}")
        weights = np.asarray(sizes, dtype=np.float64)
        choice = int(rng.choice(len(weights), p=weights / weights.sum()))
        sizes[choice] -= 1
        if sizes[choice] == 0:
            sizes.pop(choice)
            self.top_counts[word] -= 1
            self.top_total -= 1
            if self.top_counts[word] == 0:
                del self.top_counts[word]
            if not sizes:
                del words[word]
                if not words:
                    del self.tables[ctx]
        self.n_ctx[ctx] -= 1
        if self.n_ctx[ctx] == 0:
            del self.n_ctx[ctx]

    def log_joint(self) -> float:
        """Log-probability of the seating-augmented state (exchangeable)."""
        total = 0.0
        n_tables = 0
        for ctx, words in self.tables.items():
            for sizes in words.values():
                for size in sizes:
                    total += math.lgamma(size)  # (size-1)!
                n_tables += len(sizes)
        total += n_tables * math.log(self.alpha1)
        for ctx, n in self.n_ctx.items():
            total -= _log_rising(self.alpha1, n)
        total -= _log_rising(self.alpha0, self.top_total)
        for word, c in self.top_counts.items():
            prior = self.alpha0 * math.exp(base_logprob(self.p0, word))
            for j in range(c):
                total += math.log(j + prior)
        return total

    def rebuilt_customer_counts(self) -> Counter:
        fresh: Counter = Counter()
        for s, b in zip(self.sentences, self.boundaries):
            for ctx, word in self._bigrams(s, b):
                fresh[(ctx, word)] += 1
        return fresh

    def snapshot(self):
        from .predictive import BigramPredictive

        customers = {}
        for ctx, words in self.tables.items():
            for word, sizes in words.items():
                customers[(ctx, word)] = sum(sizes)
        return BigramPredictive(
            customer_counts=customers,
            ctx_totals=Counter(self.n_ctx),
            top_counts=Counter(self.top_counts),
            top_total=self.top_total,
            alpha0=self.alpha0,
            alpha1=self.alpha1,
            p0=self.p0,
        )

    def check_consistency(self) -> None:
        incremental = Counter()
        for ctx, words in self.tables.items():
            for word, sizes in words.items():
                if not sizes or min(sizes) <= 0:
                    raise StateError("empty or negative table")
                incremental[(ctx, word)] = sum(sizes)
        if incremental != self.rebuilt_customer_counts():
            raise StateError("customer counts diverged from the boundary assignment")
        tables_per_word: Counter = Counter()
        for words in self.tables.values():
            for word, sizes in words.items():
                tables_per_word[word] += len(sizes)
        if tables_per_word != self.top_counts:
            raise StateError("top-level counts diverged from the tables")
        if sum(self.n_ctx.values()) != sum(incremental.values()):
            raise StateError("restaurant totals diverged")

    # -- exact blocked update of one boundary ---------------------------------

    def _seat_choices(self, ctx, word):
        """Grouped seating options for one customer: (('join', size) with
        weight size*multiplicity) or ('new',) with weight alpha1 * p_top.
        Joining any table of one size leads to the same successor state."""
        sizes = self.tables.get(ctx, {}).get(word, [])
        counts = Counter(sizes)
        choices = [(("join", size), size * mult) for size, mult in sorted(counts.items())]
        choices.append((("new",), self.alpha1 * self.p_top(word)))
        return choices

    def _apply_choice(self, ctx, word, choice):
        words = self.tables.setdefault(ctx, {})
        sizes = words.setdefault(word, [])
        if choice[0] == "join":
            sizes[sizes.index(choice[1])] += 1
        else:
            sizes.append(1)
            self.top_counts[word] += 1
            self.top_total += 1
        self.n_ctx[ctx] += 1

    def _undo_choice(self, ctx, word, choice):
        words = self.tables[ctx]
        sizes = words[word]
        if choice[0] == "join":
            sizes[sizes.index(choice[1] + 1)] -= 1
        else:
            sizes.remove(1)
            self.top_counts[word] -= 1
            if self.top_counts[word] == 0:
                del self.top_counts[word]
            self.top_total -= 1
        self.n_ctx[ctx] -= 1
        if not sizes:
            del words[word]
            if not words:
                del self.tables[ctx]
        if self.n_ctx[ctx] == 0:
            del self.n_ctx[ctx]

    def _hypothesis_weight(self, tokens) -> float:
        """Exact probability of a token block given the remaining state.

        Sums the sequential insertion factors over every seating of the
        block, leaving the state untouched. Grouped branching keeps the
        tree small: only repeated words inside one block interact (through
        the top level or through shared tables).
        """
        if not tokens:
            return 1.0
        (ctx, word), rest = tokens[0], tokens[1:]
        denom = self.n_ctx[ctx] + self.alpha1
        total = 0.0
        for choice, weight in self._seat_choices(ctx, word):
            if weight == 0.0:
                continue
            self._apply_choice(ctx, word, choice)
            total += weight / denom * self._hypothesis_weight(rest)
            self._undo_choice(ctx, word, choice)
        return total

    def _insert_block(self, tokens, rng: np.random.Generator) -> None:
        """Seat a token block by sampling its seating from the exact
        conditional: each choice is weighted by its factor times the summed
        weight of the remaining tokens under that choice."""
        for i, (ctx, word) in enumerate(tokens):
            rest = tokens[i + 1 :]
            options, weights = [], []
            for choice, weight in self._seat_choices(ctx, word):
                if weight == 0.0:
                    continue
                self._apply_choice(ctx, word, choice)
                tail = self._hypothesis_weight(rest) if rest else 1.0
                self._undo_choice(ctx, word, choice)
                options.append(choice)
                weights.append(weight * tail)
            probs = np.asarray(weights) / sum(weights)
            pick = options[int(rng.choice(len(options), p=probs))]
            self._apply_choice(ctx, word, pick)

    def resample_position(self, sent_idx: int, pos: int, temperature: float,
                          rng: np.random.Generator) -> None:
        ids = self.sentences[sent_idx]
        bounds = self.boundaries[sent_idx]
        left = max([0] + [b for b in bounds if b < pos])
        right = min([len(ids)] + [b for b in bounds if b > pos])
        if left > 0:
            left_start = max([0] + [b for b in bounds if b < left])
            prev_word = tuple(ids[left_start:left])
        else:
            prev_word = START_CONTEXT
        if right < len(ids):
            right_end = min([len(ids)] + [b for b in bounds if b > right])
            next_word = tuple(ids[right:right_end])
        else:
            next_word = END_TOKEN

        whole = tuple(ids[left:right])
        first = tuple(ids[left:pos])
        second = tuple(ids[pos:right])

        if pos in bounds:
            self.remove(prev_word, first, rng)
            self.remove(first, second, rng)
            self.remove(second, next_word, rng)
        else:
            self.remove(prev_word, whole, rng)
            self.remove(whole, next_word, rng)

        merge_tokens = [(prev_word, whole), (whole, next_word)]
        split_tokens = [(prev_word, first), (first, second), (second, next_word)]
        p_merge = self._hypothesis_weight(merge_tokens)
        p_split = self._hypothesis_weight(split_tokens)

        a = p_merge ** (1.0 / temperature)
        b = p_split ** (1.0 / temperature)
        split = rng.random() < b / (a + b)
        if split:
            bounds.add(pos)
            self._insert_block(split_tokens, rng)
        else:
            bounds.discard(pos)
            self._insert_block(merge_tokens, rng)


# ---------------------------------------------------------------------------
# sweeps and annealed inference


def gibbs_boundary_sweep(state, temperature: float, rng: np.random.Generator) -> None:
    """Visit every intra-sentence position once, in random order."""
    positions = [
        (i, p)
        for i, s in enumerate(state.sentences)
        for p in range(1, len(s))
    ]
    for idx in rng.permutation(len(positions)):
        i, p = positions[idx]
        state.resample_position(i, p, temperature, rng)


@dataclass
class InferenceResult:
    state: object
    best_boundaries: list
    best_joint: float
    best_predictive: object = None
    joint_trace: list = field(default_factory=list)


def run_annealed_inference(state, schedule: AnnealSchedule, rng: np.random.Generator,
                           keep_trace: bool = False) -> InferenceResult:
    """Annealed sweeps; returns the best-scoring assignment seen at T=1.

    The retained approximation to the most probable segmentation is the
    sweep state whose joint log-probability was highest among those visited
    after the temperature reached 1; its frozen counts become the posterior
    predictive used for held-out scoring and decoding.
    """
    best_joint = -np.inf
    best_bounds = [set(b) for b in state.boundaries]
    best_pred = state.snapshot()
    trace = []
    for it in range(schedule.iterations):
        t = schedule.temperature(it)
        gibbs_boundary_sweep(state, t, rng)
        if t == 1.0:
            joint = state.log_joint()
            if keep_trace:
                trace.append(joint)
            if joint > best_joint:
                best_joint = joint
                best_bounds = [set(b) for b in state.boundaries]
                best_pred = state.snapshot()
    return InferenceResult(state, best_bounds, best_joint, best_pred, trace)
