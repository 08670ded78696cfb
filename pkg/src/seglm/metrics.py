"""Evaluation metrics: pooled bits-per-character and token-exact P/R/F1."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .lattice import Segmentation

LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class BpcScore:
    total_loglik: float  # natural log, terminal events included
    char_count: int

    @property
    def bpc(self) -> float:
        if self.char_count == 0:
            raise ZeroDivisionError("bpc undefined for zero characters")
        return -self.total_loglik / (LN2 * self.char_count)


def bpc(per_sentence_logliks, char_counts) -> BpcScore:
    """Pool the whole split into one ratio; not a mean of per-sentence bpc.

    Inputs are natural-log likelihoods; character counts exclude reserved
    symbols while each sentence's terminal event stays in the numerator.
    """
    logliks = list(per_sentence_logliks)
    counts = list(char_counts)
    if len(logliks) != len(counts):
        raise ValueError("loglik/count length mismatch")
    return BpcScore(float(sum(logliks)), int(sum(counts)))


@dataclass(frozen=True)
class SegScore:
    matched: int
    predicted: int
    reference: int

    @property
    def precision(self) -> float:
        return 100.0 * self.matched / self.predicted if self.predicted else 0.0

    @property
    def recall(self) -> float:
        return 100.0 * self.matched / self.reference if self.reference else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        if p + r == 0.0:
            return 0.0
        return 2.0 * p * r / (p + r)


def _spans(seg: Segmentation) -> set[tuple[int, int]]:
    return set(seg.segments())


def seg_prf(reference: list[Segmentation], predicted: list[Segmentation]) -> SegScore:
    """Token scores: a predicted token counts only when the same span,
    both left and right boundary, exists in the reference."""
    if len(reference) != len(predicted):
        raise ValueError("reference/prediction sentence count mismatch")
    matched = n_pred = n_ref = 0
    for ref, pred in zip(reference, predicted):
        if ref.n != pred.n:
            raise ValueError(
                f"character sequences differ: reference spans {ref.n}, prediction {pred.n}"
            )
        ref_spans = _spans(ref)
        pred_spans = _spans(pred)
        matched += len(ref_spans & pred_spans)
        n_pred += len(pred_spans)
        n_ref += len(ref_spans)
    return SegScore(matched, n_pred, n_ref)


def metrics_report_line(dataset: str, model_name: str, split_policy: str,
                        seg: SegScore | None, bpc_score: BpcScore | None,
                        config_hash: str, seed: int) -> str:
    """One JSON object per line, keys sorted for byte-stable output."""
    record = {
        "dataset": dataset,
        "model": model_name,
        "split_policy": split_policy,
        "config_hash": config_hash,
        "seed": seed,
        "bpc": None if bpc_score is None else round(bpc_score.bpc, 6),
        "precision": None if seg is None else round(seg.precision, 4),
        "recall": None if seg is None else round(seg.recall, 4),
        "f1": None if seg is None else round(seg.f1, 4),
        "matched_tokens": None if seg is None else seg.matched,
        "predicted_tokens": None if seg is None else seg.predicted,
        "reference_tokens": None if seg is None else seg.reference,
    }
    return json.dumps(record, sort_keys=True)
