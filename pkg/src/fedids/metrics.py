"""Confusion matrices and the four scores reported for every device.

All scores derive from a single K x K count matrix whose rows are ground
truth and whose columns are predictions. Precision and recall are macro
averaged: the unweighted mean of the per-class values, with classes whose
denominator is zero contributing 0 (the mean's divisor stays K) and
triggering a RuntimeWarning.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .errors import DataError


@dataclass(eq=False)
class ConfusionMatrix:
    """K x K non-negative counts; rows = ground truth, columns = prediction."""

    counts: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.counts, dtype=np.int64)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise DataError(f"confusion matrix must be square and non-empty, got {m.shape}")
        if np.any(m < 0):
            raise DataError("confusion matrix entries must be non-negative")
        m.setflags(write=False)
        self.counts = m

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)


def confusion(truth, pred, n_classes: int) -> ConfusionMatrix:
    """Tally predictions against ground truth into a ConfusionMatrix."""
    t = np.asarray(truth, dtype=np.int64)
    p = np.asarray(pred, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise DataError(f"truth and pred must be equal-length 1-D, got {t.shape} vs {p.shape}")
    if n_classes < 1:
        raise DataError(f"n_classes must be >= 1, got {n_classes}")
    if t.size:
        if t.min() < 0 or t.max() >= n_classes:
            raise DataError("truth labels out of range")
        if p.min() < 0 or p.max() >= n_classes:
            raise DataError("predicted labels out of range")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts)


def _counts(m) -> np.ndarray:
    if isinstance(m, ConfusionMatrix):
        return m.counts
    return ConfusionMatrix(np.asarray(m)).counts


def _nonempty_counts(m) -> np.ndarray:
    counts = _counts(m)
    if counts.sum() == 0:
        raise DataError("confusion matrix has no samples")
    return counts


def accuracy(m) -> float:
    """Fraction of samples on the diagonal."""
    counts = _nonempty_counts(m)
    return float(np.trace(counts) / counts.sum())


def macro_precision(m) -> float:
    """Unweighted mean over classes of diagonal / column sum."""
    counts = _nonempty_counts(m)
    return _macro(np.diag(counts), counts.sum(axis=0), "predicted")


def macro_recall(m) -> float:
    """Unweighted mean over classes of diagonal / row sum."""
    counts = _nonempty_counts(m)
    return _macro(np.diag(counts), counts.sum(axis=1), "ground-truth")


def _macro(diag: np.ndarray, denom: np.ndarray, kind: str) -> float:
    empty = denom == 0
    if empty.any():
        warnings.warn(
            f"classes {np.flatnonzero(empty).tolist()} have no {kind} samples; "
            "they contribute 0 to the macro average",
            RuntimeWarning,
            stacklevel=3,
        )
    per_class = np.zeros(len(diag), dtype=np.float64)
    np.divide(diag, denom, out=per_class, where=~empty)
    return float(per_class.mean())


def cohen_kappa(m) -> float:
    """Chance-corrected agreement (p_o - p_e) / (1 - p_e).

    p_e = 1 forces every sample into one diagonal cell, so perfect
    agreement: the degenerate denominator maps to 1.0.
    """
    counts = _nonempty_counts(m)
    total = counts.sum()
    p_o = np.trace(counts) / total
    p_e = float(counts.sum(axis=1) @ counts.sum(axis=0)) / float(total) ** 2
    if 1.0 - p_e == 0.0:
        return 1.0
    return float((p_o - p_e) / (1.0 - p_e))


@dataclass(frozen=True)
class Scores:
    """The four per-device scores reported for every round."""

    accuracy: float
    precision: float
    recall: float
    kappa: float


def summarize(m) -> Scores:
    return Scores(
        accuracy=accuracy(m),
        precision=macro_precision(m),
        recall=macro_recall(m),
        kappa=cohen_kappa(m),
    )


def format_percent(fraction: float, decimals: int = 3) -> str:
    """Render a fraction as a percentage, e.g. 0.96594 -> '96.594 %'.

    Rounds half away from zero at the requested number of decimals.
    """
    quantum = Decimal(1).scaleb(-decimals)
    value = Decimal(repr(fraction * 100.0)).quantize(quantum, rounding=ROUND_HALF_UP)
    return f"{value} %"


def score_lines(scores: Scores) -> list[str]:
    """key=value lines, full float precision."""
    return [
        f"accuracy={scores.accuracy!r}",
        f"precision={scores.precision!r}",
        f"recall={scores.recall!r}",
        f"kappa={scores.kappa!r}",
    ]


def score_csv_row(device: str, round_index: int, scores: Scores) -> list[str]:
    """One row for the per-round CSV report (matches its header order)."""
    return [
        device,
        str(round_index),
        repr(scores.accuracy),
        repr(scores.precision),
        repr(scores.recall),
        repr(scores.kappa),
    ]
