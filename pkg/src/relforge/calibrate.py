"""Decision-threshold tuning: global, per-leaf-category, and hybrid-weight search.

Thresholds are searched over a fixed grid (default 0.30..0.70, step 0.02,
21 points) by maximizing positive-class F1, breaking ties toward the
smallest threshold. Leaves with too few samples fall back to the global
threshold. Hybrid-weight search walks the probability simplex on a fixed
step and jointly picks the best (weights, threshold) pair.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError
from .lexical import HybridWeights


@dataclass(frozen=True)
class ThresholdGrid:
    lo: float = 0.30
    hi: float = 0.70
    step: float = 0.02

    def __post_init__(self) -> None:
        if self.step <= 0:
            raise ConfigError(f"grid step must be positive, got {self.step}")
        if self.lo > self.hi:
            raise ConfigError(f"grid lo={self.lo} exceeds hi={self.hi}")
        n = (self.hi - self.lo) / self.step
        if abs(n - round(n)) > 1e-9:
            raise ConfigError(f"(hi - lo) / step = {n} is not an integer")

    def points(self) -> np.ndarray:
        n = int(round((self.hi - self.lo) / self.step))
        return np.round(self.lo + self.step * np.arange(n + 1), 10)


def decide(prob: float, threshold: float) -> int:
    """1 if prob >= threshold else 0 (inclusive boundary)."""
    return 1 if prob >= threshold else 0


def _f1_at(preds: np.ndarray, labels: np.ndarray) -> float:
    tp = int(np.sum(preds & (labels == 1)))
    fp = int(np.sum(preds & (labels == 0)))
    fn = int(np.sum((~preds) & (labels == 1)))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def _best_threshold(probs: np.ndarray, labels: np.ndarray, grid: ThresholdGrid) -> tuple[float, float]:
    """(threshold, f1) maximizing positive-class F1; ties go to the smallest threshold."""
    best_t = None
    best_f1 = -1.0
    for t in grid.points():
        f1 = _f1_at(probs >= t, labels)
        if f1 > best_f1:
            best_f1 = f1
            best_t = float(t)
    return best_t, best_f1


def _as_prob_label_arrays(probs: Sequence[float], labels: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    if len(probs) == 0 or len(probs) != len(labels):
        raise DataError("probs and labels must be non-empty and equal length")
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels)
    if not np.all((y == 0) | (y == 1)):
        raise DataError("labels must be 0 or 1")
    return p, y


def tune_global_threshold(
    probs: Sequence[float], labels: Sequence[int], grid: ThresholdGrid = ThresholdGrid()
) -> float:
    """Single F1-maximizing grid threshold over all samples."""
    p, y = _as_prob_label_arrays(probs, labels)
    return _best_threshold(p, y, grid)[0]


@dataclass(frozen=True)
class CalibrationTable:
    global_threshold: float
    leaf_thresholds: dict[str, float] = field(default_factory=dict)
    min_leaf_support: int = 20
    hybrid_weights: HybridWeights = HybridWeights(1.0, 0.0, 0.0)
    grid: ThresholdGrid = ThresholdGrid()

    def __post_init__(self) -> None:
        pts = self.grid.points()
        for name, t in [("global", self.global_threshold), *self.leaf_thresholds.items()]:
            if not name:
                raise ConfigError("leaf threshold keys must be non-empty")
            if not np.any(np.abs(pts - t) < 1e-9):
                raise ConfigError(f"threshold {t} for {name!r} is not on the grid")

    def threshold_for(self, leaf: str | None) -> float:
        if leaf is not None and leaf in self.leaf_thresholds:
            return self.leaf_thresholds[leaf]
        return self.global_threshold

    def to_json(self) -> str:
        payload = {
            "grid": {"lo": self.grid.lo, "hi": self.grid.hi, "step": self.grid.step},
            "global_threshold": self.global_threshold,
            "min_leaf_support": self.min_leaf_support,
            "leaf_thresholds": dict(sorted(self.leaf_thresholds.items())),
            "hybrid_weights": self.hybrid_weights.as_dict(),
        }
        return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "CalibrationTable":
        try:
            raw = json.loads(text)
            grid = ThresholdGrid(**raw["grid"])
            weights = HybridWeights(**raw["hybrid_weights"])
            return cls(
                global_threshold=raw["global_threshold"],
                leaf_thresholds=dict(raw["leaf_thresholds"]),
                min_leaf_support=int(raw["min_leaf_support"]),
                hybrid_weights=weights,
                grid=grid,
            )
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"malformed calibration table: {exc}") from None


def tune_leaf_thresholds(
    preds: Sequence[tuple[float, int, str]],
    grid: ThresholdGrid = ThresholdGrid(),
    min_leaf_support: int = 20,
    hybrid_weights: HybridWeights = HybridWeights(1.0, 0.0, 0.0),
) -> CalibrationTable:
    """Per-leaf F1-maximizing thresholds; sparse leaves fall back to the global one.

    preds are (probability, label, leaf) triples. The global threshold is
    always tuned over all samples. Output is independent of input order.
    """
    if not preds:
        raise DataError("cannot calibrate on an empty prediction list")
    probs = np.array([p for p, _, _ in preds], dtype=np.float64)
    labels = np.array([l for _, l, _ in preds])
    leaves = [leaf for _, _, leaf in preds]
    if any(not leaf for leaf in leaves):
        raise DataError("every calibration sample needs a non-empty leaf")
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("labels must be 0 or 1")

    global_threshold, _ = _best_threshold(probs, labels, grid)
    leaf_thresholds: dict[str, float] = {}
    for leaf in sorted(set(leaves)):
        mask = np.array([l == leaf for l in leaves])
        if int(mask.sum()) < min_leaf_support:
            continue
        leaf_thresholds[leaf], _ = _best_threshold(probs[mask], labels[mask], grid)
    return CalibrationTable(
        global_threshold=global_threshold,
        leaf_thresholds=leaf_thresholds,
        min_leaf_support=min_leaf_support,
        hybrid_weights=hybrid_weights,
        grid=grid,
    )


def apply_calibration(
    preds: Sequence[tuple[float, str | None]], table: CalibrationTable
) -> list[int]:
    """Binary labels: the leaf threshold when known, otherwise the global one."""
    return [decide(prob, table.threshold_for(leaf)) for prob, leaf in preds]


def tune_hybrid_weights(
    val: Sequence[tuple[float, float, float, int]],
    grid: ThresholdGrid = ThresholdGrid(),
    weight_step: float = 0.05,
) -> tuple[HybridWeights, float]:
    """Exhaustive search over the simplex grid of (w_p, w_j, w_c) and thresholds.

    val rows are (p_model, jaccard, containment, label). Returns the
    F1-maximizing (weights, threshold); ties prefer higher w_p, then the
    lower threshold.
    """
    if not val:
        raise DataError("cannot tune hybrid weights on an empty validation list")
    steps = round(1.0 / weight_step)
    if steps < 1 or abs(steps * weight_step - 1.0) > 1e-9:
        raise ConfigError(f"weight_step={weight_step} must evenly divide 1.0")
    p = np.array([r[0] for r in val], dtype=np.float64)
    j = np.array([r[1] for r in val], dtype=np.float64)
    c = np.array([r[2] for r in val], dtype=np.float64)
    labels = np.array([r[3] for r in val])
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("labels must be 0 or 1")

    best: tuple[float, float, float] | None = None  # (f1, w_p, -threshold)
    best_result: tuple[HybridWeights, float] | None = None
    for i in range(steps + 1):
        for k in range(steps + 1 - i):
            w_p = i / steps
            w_j = k / steps
            w_c = (steps - i - k) / steps
            scores = w_p * p + w_j * j + w_c * c
            threshold, f1 = _best_threshold(scores, labels, grid)
            key = (f1, w_p, -threshold)
            if best is None or key > best:
                best = key
                best_result = (HybridWeights(w_p, w_j, w_c), threshold)
    return best_result
