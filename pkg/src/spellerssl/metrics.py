"""Evaluation metrics: binary F1, Fisher's discriminant ratio,
selection timing, and information transfer rate."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import LabelError, SpellerError, StatisticsError


def binary_f1(predictions, labels) -> float:
    """F1 of the positive class; 0 when precision + recall is 0."""
    pred = np.asarray(predictions).astype(np.int64).reshape(-1)
    lab = np.asarray(labels).astype(np.int64).reshape(-1)
    if pred.shape != lab.shape:
        raise SpellerError(f"{pred.shape[0]} predictions vs {lab.shape[0]} labels")
    if np.any((lab != 0) & (lab != 1)) or np.any((pred != 0) & (pred != 1)):
        raise LabelError("predictions and labels must be 0 or 1")
    tp = int(np.sum((pred == 1) & (lab == 1)))
    fp = int(np.sum((pred == 1) & (lab == 0)))
    fn = int(np.sum((pred == 0) & (lab == 1)))
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2.0 * tp / (2 * tp + fp + fn)


def fdr(scores_p300, scores_non) -> float:
    """Squared mean separation over summed population variances."""
    p = np.asarray(scores_p300, dtype=np.float64).reshape(-1)
    n = np.asarray(scores_non, dtype=np.float64).reshape(-1)
    if p.size < 2 or n.size < 2:
        raise StatisticsError(f"each group needs >= 2 samples, got {p.size} and {n.size}")
    denom = p.var() + n.var()
    if denom == 0.0:
        return 0.0 if p.mean() == n.mean() else math.inf
    return float((p.mean() - n.mean()) ** 2 / denom)


def selection_time(repetitions: int) -> float:
    """Seconds per character selection: 2.5 s pause + 2.1 s per repetition."""
    if repetitions < 1:
        raise SpellerError(f"repetitions must be >= 1, got {repetitions}")
    return 2.5 + 2.1 * repetitions


def itr(accuracy: float, repetitions: int, n_symbols: int = 36) -> float:
    """Information transfer rate in bits/min.

    x*log2(x) takes its 0 limit at accuracy 0 and 1, so chance-level
    accuracy yields exactly 0 and perfect accuracy log2(N) bits per
    selection.
    """
    if not 0.0 <= accuracy <= 1.0:
        raise SpellerError(f"accuracy {accuracy} outside [0, 1]")
    a = float(accuracy)
    bits = math.log2(n_symbols)
    if a > 0.0:
        bits += a * math.log2(a)
    if a < 1.0:
        bits += (1.0 - a) * math.log2((1.0 - a) / (n_symbols - 1))
    return 60.0 / selection_time(repetitions) * bits


@dataclass
class MetricsReport:
    """Per-run evaluation summary (CRR/ITR per repetition plus
    trial-level statistics)."""
    crr_per_repetition: np.ndarray      # percent, length R
    accuracy: float                     # percent
    binary_f1: float
    fdr: float
    itr_per_repetition: np.ndarray      # bits/min, length R
    pretraining: str = "scratch"        # scratch | checkpoint
    group_size: int = 1
    calibration_fraction: float = 1.0
    n_symbols: int = 36

    def __post_init__(self):
        self.crr_per_repetition = np.asarray(self.crr_per_repetition, dtype=np.float64)
        self.itr_per_repetition = np.asarray(self.itr_per_repetition, dtype=np.float64)


def build_report(crr_per_repetition, accuracy: float, f1: float, fdr_value: float,
                 *, pretraining: str = "scratch", group_size: int = 1,
                 calibration_fraction: float = 1.0, n_symbols: int = 36) -> MetricsReport:
    """Assemble a MetricsReport; the ITR column is recomputed from the CRR
    column so the two always agree."""
    crr = np.asarray(crr_per_repetition, dtype=np.float64)
    for name, value in (("crr", crr), ("accuracy", accuracy), ("f1", f1), ("fdr", fdr_value)):
        if value is None or (isinstance(value, np.ndarray) and value.size == 0):
            raise SpellerError(f"missing metric component: {name}")
    if np.any(crr < 0) or np.any(crr > 100) or not 0.0 <= accuracy <= 100.0:
        raise SpellerError("CRR and accuracy must lie in [0, 100] percent")
    itrs = np.array([itr(crr[r] / 100.0, r + 1, n_symbols) for r in range(crr.size)])
    return MetricsReport(crr, float(accuracy), float(f1), float(fdr_value), itrs,
                         pretraining=pretraining, group_size=group_size,
                         calibration_fraction=calibration_fraction, n_symbols=n_symbols)
