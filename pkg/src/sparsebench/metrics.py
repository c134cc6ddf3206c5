"""Support-recovery and prediction metrics."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .datagen import Dataset

ZERO_THRESHOLD = 1e-10


@dataclass(frozen=True)
class SelectionMetrics:
    accuracy: float
    fdr: float
    tf: int
    ff: int


@dataclass
class MetricsRecord:
    """One fitted model scored against ground truth and held-out data.

    ``mse`` is the test MSE for regression; for classification ``auc`` is
    filled instead and ``mse`` is left as NaN.
    """

    accuracy: float
    fdr: float
    tf: int
    ff: int
    mse: float = math.nan
    auc: float = math.nan
    support_size: int = 0
    seconds: float = 0.0
    relative_time: float = math.nan

    def as_dict(self) -> dict:
        return asdict(self)


def support_of(w, threshold: float = ZERO_THRESHOLD) -> np.ndarray:
    return np.flatnonzero(np.abs(np.asarray(w, dtype=float)) > threshold)


def selection_metrics(w, w_true) -> SelectionMetrics:
    """Accuracy ``TF / k_true`` and false-discovery rate ``FF / (TF + FF)``.

    An empty selection has FDR 0 by convention.
    """
    w, w_true = np.asarray(w, dtype=float), np.asarray(w_true, dtype=float)
    if w.shape != w_true.shape:
        raise ValueError("w and w_true must have the same length")
    chosen = np.abs(w) > ZERO_THRESHOLD
    truth = np.abs(w_true) > ZERO_THRESHOLD
    k_true = int(truth.sum())
    if k_true == 0:
        raise ValueError("w_true has no nonzero entries")
    tf = int(np.sum(chosen & truth))
    ff = int(np.sum(chosen & ~truth))
    fdr = ff / (tf + ff) if tf + ff else 0.0
    return SelectionMetrics(tf / k_true, fdr, tf, ff)


def mse(w, data: Dataset, intercept: float = 0.0) -> float:
    """Mean squared residual ``(1/n) sum (y_i - b - x_i'w)^2``."""
    r = data.y - intercept - data.X @ np.asarray(w, dtype=float)
    return float(r @ r) / data.n


def auc(scores, labels) -> float:
    """Area under the ROC curve (Mann-Whitney form, ties count one half)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same length")
    pos = labels > 0
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))
