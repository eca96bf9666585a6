"""Positive-class F1 and the two-task competition score."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import DataError


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(pred: Sequence[int], gold: Sequence[int]) -> Confusion:
    """Count outcomes with class 1 as positive; inputs must be equal-length binary."""
    if len(pred) != len(gold):
        raise DataError(f"length mismatch: {len(pred)} predictions vs {len(gold)} labels")
    if len(pred) == 0:
        raise DataError("cannot build a confusion matrix from zero pairs")
    tp = fp = fn = tn = 0
    for p, g in zip(pred, gold):
        if p not in (0, 1) or g not in (0, 1):
            raise DataError(f"non-binary value in predictions/labels: ({p!r}, {g!r})")
        if p == 1 and g == 1:
            tp += 1
        elif p == 1:
            fp += 1
        elif g == 1:
            fn += 1
        else:
            tn += 1
    return Confusion(tp=tp, fp=fp, fn=fn, tn=tn)


def precision_positive(c: Confusion) -> float:
    denom = c.tp + c.fp
    return c.tp / denom if denom else 0.0


def recall_positive(c: Confusion) -> float:
    denom = c.tp + c.fn
    return c.tp / denom if denom else 0.0


def f1_positive(c: Confusion) -> float:
    """2*tp / (2*tp + fp + fn); 0.0 on the degenerate all-zero denominator."""
    denom = 2 * c.tp + c.fp + c.fn
    return 2 * c.tp / denom if denom else 0.0


def competition_score(qc_f1: float, qi_f1: float) -> float:
    """Arithmetic mean of the two per-task positive-class F1 scores."""
    for name, value in (("qc_f1", qc_f1), ("qi_f1", qi_f1)):
        if not 0.0 <= value <= 1.0:
            raise DataError(f"{name}={value} outside [0, 1]")
    return (qc_f1 + qi_f1) / 2.0


def report(pred: Sequence[int], gold: Sequence[int]) -> dict[str, float | int]:
    """Evaluation summary used by the CLI's JSON report."""
    c = confusion(pred, gold)
    return {
        "precision": precision_positive(c),
        "recall": recall_positive(c),
        "f1_positive": f1_positive(c),
        "support_pos": c.tp + c.fn,
        "support_neg": c.fp + c.tn,
    }
