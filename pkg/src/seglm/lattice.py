"""Dynamic programs over one sentence's segmentation lattice.

Positions 0..n are boundary states; an edge from j to t scores the segment
covering characters j..t-1, and segment lengths are capped. The same
recursion yields the marginal (log-sum-exp), the best segmentation (max
with backpointers), and the posterior expected powered segment length via
a first-order expectation semiring: alongside each log-weight we carry the
conditional expectation of the accumulated statistic, combining branches
with posterior weights so everything stays finite in log space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numeric import autodiff as ad


@dataclass(frozen=True)
class RegConfig:
    """Expected-length penalty: weight lam on E[sum of |segment|^beta]."""

    beta: float = 2.0
    lam: float = 0.0

    def __post_init__(self):
        if self.beta < 0 or self.lam < 0:
            raise ValueError("beta and lam must be nonnegative")


@dataclass(frozen=True)
class Segmentation:
    """Strictly increasing segment end positions, the last equal to n."""

    boundaries: tuple[int, ...]

    def __post_init__(self):
        if not self.boundaries:
            raise ValueError("a segmentation needs at least one segment")
        prev = 0
        for b in self.boundaries:
            if b <= prev:
                raise ValueError(f"boundaries must strictly increase: {self.boundaries}")
            prev = b

    @property
    def n(self) -> int:
        return self.boundaries[-1]

    def segments(self):
        prev = 0
        for b in self.boundaries:
            yield prev, b
            prev = b

    def internal(self) -> frozenset[int]:
        """Boundaries excluding the final sentence end."""
        return frozenset(self.boundaries[:-1])


def format_segmentation(text: str, seg: Segmentation) -> str:
    if len(text) != seg.n:
        raise ValueError(f"text length {len(text)} != segmentation span {seg.n}")
    return " ".join(text[a:b] for a, b in seg.segments())


def parse_segmentation(line: str) -> tuple[str, Segmentation]:
    """Invert ``format_segmentation``: split a spaced line into boundaries."""
    pieces = [p for p in line.split(" ") if p]
    if not pieces:
        raise ValueError("empty segmentation line")
    ends, pos = [], 0
    for p in pieces:
        pos += len(p)
        ends.append(pos)
    return "".join(pieces), Segmentation(tuple(ends))


def marginal_loglik(model, sentence, context=None, scores=None) -> ad.Node:
    """Log marginal over all capped segmentations, via the forward recursion."""
    if scores is None:
        scores = model.score_segments(sentence, context)
    n, cap = scores.n, scores.cap
    alpha = [ad.constant(0.0)]
    for t in range(1, n + 1):
        parts = [
            ad.add(alpha[j], scores.edge(j, t - j))
            for j in range(max(0, t - cap), t)
        ]
        alpha.append(parts[0] if len(parts) == 1 else ad.logsumexp(ad.stack(parts), axis=0))
    return ad.add(alpha[n], scores.terminal)


def map_segmentation(model, sentence, context=None, scores=None):
    """Best segmentation and its log-probability (max-product recursion).

    Ties prefer the larger predecessor, i.e. the shorter final segment.
    Runs on plain floats; no graph is recorded.
    """
    with ad.no_grad():
        if scores is None:
            scores = model.score_segments(sentence, context)
        n, cap = scores.n, scores.cap
        best = np.full(n + 1, -np.inf)
        back = np.zeros(n + 1, dtype=int)
        best[0] = 0.0
        for t in range(1, n + 1):
            for j in range(t - 1, max(0, t - cap) - 1, -1):
                cand = best[j] + scores.edge_value(j, t - j)
                if cand > best[t]:
                    best[t] = cand
                    back[t] = j
        bounds = []
        t = n
        while t > 0:
            bounds.append(t)
            t = back[t]
        seg = Segmentation(tuple(reversed(bounds)))
        return seg, float(best[n] + scores.terminal.data)


def expected_length_penalty(model, sentence, beta: float, context=None, scores=None):
    """(log p(x), R) where R = posterior expectation of sum |segment|^beta.

    One forward pass in the expectation semiring. Each lattice state holds
    (log-weight, conditional mean of the statistic); combining incoming
    edges takes a posterior-weighted average of the means, so the statistic
    never leaves linear space and the weights never leave log space. The
    terminal transition contributes zero length.
    """
    if scores is None:
        scores = model.score_segments(sentence, context)
    n, cap = scores.n, scores.cap
    alpha = [ad.constant(0.0)]
    mean_stat = [ad.constant(0.0)]
    for t in range(1, n + 1):
        lo = max(0, t - cap)
        parts = [ad.add(alpha[j], scores.edge(j, t - j)) for j in range(lo, t)]
        stats = [
            ad.add(mean_stat[j], ad.constant(float(t - j) ** beta))
            for j in range(lo, t)
        ]
        if len(parts) == 1:
            alpha.append(parts[0])
            mean_stat.append(stats[0])
            continue
        inc = ad.stack(parts)
        a_t = ad.logsumexp(inc, axis=0)
        weights = ad.exp(ad.sub(inc, a_t))
        alpha.append(a_t)
        mean_stat.append(ad.sum_all(ad.mul(weights, ad.stack(stats))))
    loglik = ad.add(alpha[n], scores.terminal)
    return loglik, mean_stat[n]


def training_loss(model, sentence, reg: RegConfig, context=None,
                  train: bool = False, rng=None) -> ad.Node:
    """Penalized negative log-likelihood of one sentence, fully recorded."""
    scores = model.score_segments(sentence, context, train=train, rng=rng)
    if reg.lam == 0.0:
        loss = ad.neg(marginal_loglik(model, sentence, scores=scores))
    else:
        loglik, r = expected_length_penalty(model, sentence, reg.beta, scores=scores)
        loss = ad.add(ad.neg(loglik), ad.mul(ad.constant(reg.lam), r))
    if not np.isfinite(loss.data):
        raise FloatingPointError(f"non-finite training loss {loss.data!r}")
    return loss


@dataclass
class FrozenScores:
    """Segment scores from a plain table; adapts fixed models to the lattice.

    ``table[(start, length)]`` holds the segment log-probability and
    ``terminal`` the end transition. Used by tests and by frozen baseline
    predictives.
    """

    n: int
    cap: int
    table: dict[tuple[int, int], float]
    terminal_value: float = 0.0

    def edge(self, start: int, length: int) -> ad.Node:
        return ad.constant(self.table[(start, length)])

    def edge_value(self, start: int, length: int) -> float:
        return self.table[(start, length)]

    @property
    def terminal(self) -> ad.Node:
        return ad.constant(self.terminal_value)
