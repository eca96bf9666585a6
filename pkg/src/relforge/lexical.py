"""Token overlap scoring: Jaccard, containment, and the blended hybrid score.

The hybrid score combines a model's semantic probability with two lexical
overlap signals computed on query/title token sets:

    S = w_p * p_model + w_j * jaccard + w_c * containment

Weights live on the probability simplex so the blended score stays in
[0, 1] and is directly comparable to decision thresholds.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

from .errors import DataError

log = logging.getLogger(__name__)


def tokenize(text: str) -> frozenset[str]:
    """Whitespace-split tokens, deduplicated. Input should already be normalized."""
    return frozenset(text.split())


def jaccard(q: frozenset[str], t: frozenset[str]) -> float:
    """|q & t| / |q | t|; 0.0 when both sets are empty."""
    if not q and not t:
        return 0.0
    return len(q & t) / len(q | t)


def containment(q: frozenset[str], t: frozenset[str]) -> float:
    """Fraction of query tokens present in the title set; 0.0 for an empty query."""
    if not q:
        log.warning("containment of an empty query token set; returning 0.0")
        return 0.0
    return len(q & t) / len(q)


@dataclass(frozen=True)
class HybridWeights:
    """Non-negative weights on the probability simplex (normalized on construction)."""

    w_p: float
    w_j: float
    w_c: float

    def __post_init__(self) -> None:
        total = self.w_p + self.w_j + self.w_c
        if min(self.w_p, self.w_j, self.w_c) < 0:
            raise DataError(f"hybrid weights must be non-negative, got {self}")
        if total <= 0:
            raise DataError("hybrid weights must not all be zero")
        if abs(total - 1.0) > 1e-9:
            object.__setattr__(self, "w_p", self.w_p / total)
            object.__setattr__(self, "w_j", self.w_j / total)
            object.__setattr__(self, "w_c", self.w_c / total)

    def as_dict(self) -> dict[str, float]:
        return {"w_p": self.w_p, "w_j": self.w_j, "w_c": self.w_c}


def hybrid_score(p_model: float, j: float, c: float, w: HybridWeights) -> float:
    """Blend the three signals; every input must lie in [0, 1]."""
    for name, value in (("p_model", p_model), ("jaccard", j), ("containment", c)):
        if not 0.0 <= value <= 1.0:
            raise DataError(f"{name}={value} outside [0, 1]")
    return w.w_p * p_model + w.w_j * j + w.w_c * c
