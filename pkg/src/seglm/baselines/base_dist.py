"""Base measure over words for the nonparametric segmenters.

Generates either the utterance terminator (probability ``p_end``) or a word:
a geometric length draw (continue with ``p_continue``) with uniform
characters. The terminator's symbol is never part of the alphabet.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

END_TOKEN = "</s>"
START_CONTEXT = "<s>"


@dataclass(frozen=True)
class BaseDist:
    p_end: float
    p_continue: float
    n_chars: int

    def __post_init__(self):
        if not 0.0 < self.p_end < 1.0:
            raise ValueError(f"p_end must be in (0,1), got {self.p_end}")
        if not 0.0 < self.p_continue < 1.0:
            raise ValueError(f"p_continue must be in (0,1), got {self.p_continue}")
        if self.n_chars < 1:
            raise ValueError("alphabet must be nonempty")


def base_logprob(p0: BaseDist, word) -> float:
    """log p0 of a word (tuple of character ids) or of the terminator."""
    if word == END_TOKEN:
        return float(np.log(p0.p_end))
    if len(word) == 0:
        raise ValueError("words must contain at least one character")
    length = len(word)
    return float(
        np.log(1.0 - p0.p_end)
        + (length - 1) * np.log(p0.p_continue)
        + np.log(1.0 - p0.p_continue)
        - length * np.log(p0.n_chars)
    )
