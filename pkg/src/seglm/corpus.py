"""Corpus loading, closed-vocabulary indexing, and substring lexicon extraction.

Sentences are sequences of Unicode scalar values, so Chinese text needs no
special casing. Whitespace in the input marks reference word boundaries;
those survive only as evaluation-side metadata and are never visible to
training code except through the explicit evaluation accessor.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

END_WORD = "⟨/w⟩"
END_SEQ = "⟨/s⟩"

CONTEXT_MAGIC = b"SEGCTX1\x00"


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Vocab:
    """Closed character set with dense ids; two reserved ids at the top.

    Characters occupy ids 0..n-1; the end-of-word marker gets id n and the
    end-of-sequence marker id n+1. Neither reserved symbol ever occurs
    inside a sentence.
    """

    chars: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.chars)})
        if len(self._index) != len(self.chars):
            raise CorpusError("duplicate characters in vocabulary")

    @property
    def size(self) -> int:
        """Number of real characters, excluding the two reserved symbols."""
        return len(self.chars)

    @property
    def end_word_id(self) -> int:
        return len(self.chars)

    @property
    def end_seq_id(self) -> int:
        return len(self.chars) + 1

    @property
    def total_symbols(self) -> int:
        return len(self.chars) + 2

    def encode(self, text: str) -> tuple[int, ...]:
        try:
            return tuple(self._index[c] for c in text)
        except KeyError as e:
            raise CorpusError(f"character {e.args[0]!r} not in vocabulary") from None

    def has(self, text: str) -> bool:
        return all(c in self._index for c in text)

    def decode(self, ids) -> str:
        out = []
        for i in ids:
            if i >= len(self.chars):
                raise CorpusError(f"id {i} is reserved, not a character")
            out.append(self.chars[i])
        return "".join(out)


@dataclass(frozen=True)
class RawSentence:
    """One input line after normalization: text plus boundary metadata."""

    text: str
    boundaries: frozenset[int]


@dataclass(frozen=True)
class Sentence:
    """Character ids plus hidden reference boundaries.

    The reference segmentation is deliberately awkward to reach: training
    code gets ids only, scoring code calls ``gold_boundaries_for_eval``.
    """

    ids: tuple[int, ...]
    _gold: frozenset[int] = field(default=frozenset(), repr=False)
    context_ref: int | None = None

    def __post_init__(self):
        if len(self.ids) < 1:
            raise CorpusError("empty sentence")
        bad = [b for b in self._gold if not 1 <= b <= len(self.ids) - 1]
        if bad:
            raise CorpusError(f"gold boundaries {bad} outside 1..len-1")

    def __len__(self) -> int:
        return len(self.ids)

    def gold_boundaries_for_eval(self) -> frozenset[int]:
        return self._gold


@dataclass
class Corpus:
    train: list[Sentence]
    valid: list[Sentence]
    test: list[Sentence]
    vocab: Vocab
    provenance: dict = field(default_factory=dict)

    def split(self, name: str) -> list[Sentence]:
        try:
            return {"train": self.train, "valid": self.valid, "test": self.test}[name]
        except KeyError:
            raise CorpusError(f"unknown split {name!r}") from None


@dataclass(frozen=True)
class Lexicon:
    """Candidate multi-character segments, ordered lexicographically by ids."""

    entries: tuple[tuple[int, ...], ...]
    counts: tuple[int, ...]
    max_len: int
    min_freq: int

    def __post_init__(self):
        bad = [e for e in self.entries if not 2 <= len(e) <= self.max_len]
        if bad:
            raise CorpusError(f"lexicon entries outside length [2, {self.max_len}]: {bad[:3]}")
        index = {e: i for i, e in enumerate(self.entries)}
        if len(index) != len(self.entries):
            raise CorpusError("duplicate lexicon entries")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.entries)

    def index_of(self, segment: tuple[int, ...]) -> int | None:
        return self._index.get(segment)


def load_corpus(path, strip_whitespace: bool = True) -> list[RawSentence]:
    """Read one sentence per line; whitespace positions become boundaries.

    With ``strip_whitespace`` every Unicode whitespace character is removed
    and the count of preceding non-space characters is recorded as a
    boundary. Lines that are empty after normalization are dropped. Invalid
    UTF-8 fails with the offending byte offset.
    """
    with open(path, "rb") as f:
        raw = f.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise CorpusError(f"{path}: invalid UTF-8 at byte offset {e.start}") from None

    sentences = []
    for line in text.splitlines():
        if strip_whitespace:
            chars = []
            boundaries = set()
            for ch in line:
                if ch.isspace():
                    if chars:
                        boundaries.add(len(chars))
                else:
                    chars.append(ch)
            stripped = "".join(chars)
            boundaries.discard(len(stripped))
            if not stripped:
                continue
            sentences.append(RawSentence(stripped, frozenset(boundaries)))
        else:
            if not line:
                continue
            sentences.append(RawSentence(line, frozenset()))
    return sentences


def build_closed_corpus(
    train: list[RawSentence],
    valid: list[RawSentence],
    test: list[RawSentence],
    provenance: dict | None = None,
) -> Corpus:
    """Index splits over the training alphabet, dropping unseen-char lines.

    The vocabulary is exactly the set of characters occurring in training
    sentences; validation and test sentences containing anything else are
    dropped and counted in the provenance record.
    """
    if not train:
        raise CorpusError("training split is empty")
    alphabet = sorted({c for s in train for c in s.text})
    vocab = Vocab(tuple(alphabet))

    def index_split(raw_list, closed):
        kept, dropped = [], 0
        for i, raw_s in enumerate(raw_list):
            if closed and not vocab.has(raw_s.text):
                dropped += 1
                continue
            kept.append(Sentence(vocab.encode(raw_s.text), raw_s.boundaries, context_ref=i))
        return kept, dropped

    train_s, _ = index_split(train, closed=False)
    valid_s, valid_dropped = index_split(valid, closed=True)
    test_s, test_dropped = index_split(test, closed=True)
    prov = dict(provenance or {})
    prov.update({"valid_dropped": valid_dropped, "test_dropped": test_dropped})
    return Corpus(train_s, valid_s, test_s, vocab, prov)


def extract_lexicon(train: list[Sentence], max_len: int, min_freq: int) -> Lexicon:
    """All substrings of length 2..max_len seen at least min_freq times.

    Occurrences are counted at every position, overlapping included; the
    entry order is lexicographic by character ids so the memory layout is
    reproducible across runs. An empty result is legal.
    """
    if max_len < 2:
        raise CorpusError(f"max_len must be >= 2, got {max_len}")
    if min_freq < 1:
        raise CorpusError(f"min_freq must be >= 1, got {min_freq}")
    counts: Counter = Counter()
    for sent in train:
        ids = sent.ids
        n = len(ids)
        for length in range(2, min(max_len, n) + 1):
            for start in range(n - length + 1):
                counts[ids[start : start + length]] += 1
    entries = sorted(e for e, c in counts.items() if c >= min_freq)
    return Lexicon(
        entries=tuple(entries),
        counts=tuple(counts[e] for e in entries),
        max_len=max_len,
        min_freq=min_freq,
    )


def dump_lexicon_tsv(lexicon: Lexicon, vocab: Vocab, path) -> None:
    """Write entry<TAB>count lines in storage order."""
    with open(path, "w", encoding="utf-8") as f:
        for entry, count in zip(lexicon.entries, lexicon.counts):
            f.write(f"{vocab.decode(entry)}\t{count}\n")


def write_context_vectors(path, vectors: np.ndarray) -> None:
    """Write a (sentences, R, d) float array in the binary context format."""
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.ndim != 3:
        raise CorpusError(f"context vectors must be 3-d, got shape {vectors.shape}")
    n, r, d = vectors.shape
    with open(path, "wb") as f:
        f.write(CONTEXT_MAGIC)
        f.write(struct.pack("<III", n, r, d))
        f.write(vectors.astype("<f4").tobytes())


def read_context_vectors(path) -> np.ndarray:
    """Read the binary context-vector file back as (sentences, R, d)."""
    with open(path, "rb") as f:
        magic = f.read(len(CONTEXT_MAGIC))
        if magic != CONTEXT_MAGIC:
            raise CorpusError(f"{path}: not a context-vector file (bad magic)")
        header = f.read(12)
        if len(header) != 12:
            raise CorpusError(f"{path}: truncated header")
        n, r, d = struct.unpack("<III", header)
        payload = f.read(4 * n * r * d)
        if len(payload) != 4 * n * r * d:
            raise CorpusError(f"{path}: truncated payload")
        return np.frombuffer(payload, dtype="<f4").reshape(n, r, d).astype(np.float64)
