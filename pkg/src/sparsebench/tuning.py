"""Hyper-parameter search: ridge schedules, k-grids, validation selection."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .datagen import Dataset
from .metrics import auc, mse, selection_metrics
from .penalties import RegPath

log = logging.getLogger(__name__)


class OutOfRangeError(ValueError):
    """Target sparsity outside the range covered by a path."""


def gamma0(data: Dataset, k: int | None = None, factor: float = 1.0) -> float:
    """Base ridge level ``1 / max_i |x_i|^2``.

    With ``k`` given the dimension-normalised value
    ``factor * p / (n k max_i |x_i|^2)`` is returned instead.
    """
    top = float(np.max(np.einsum("ij,ij->i", data.X, data.X)))
    if top <= 0:
        raise ValueError("design matrix has only zero rows")
    if k is None:
        return factor / top
    return factor * data.p / (data.n * k * top)


def gamma_schedule(data: Dataset, steps: int, k: int | None = None,
                   factor: float = 1.0) -> np.ndarray:
    """``steps`` ridge levels ``gamma0 * 2^t``, smallest first."""
    if steps < 1:
        raise ValueError("steps must be at least 1")
    return gamma0(data, k, factor) * 2.0 ** np.arange(steps)


def default_k_grid(p: int, n: int, k_true: int | None = None, count: int = 10) -> list[int]:
    """Log-spaced distinct sparsity levels.

    Spans ``max(1, k_true/4) .. min(p, 4 k_true)`` when the true sparsity is
    known and ``1 .. min(p, n/2)`` otherwise.
    """
    if k_true is not None:
        lo, hi = max(1.0, k_true / 4), float(min(p, 4 * k_true))
    else:
        lo, hi = 1.0, float(max(1, min(p, n // 2)))
    raw = np.exp(np.linspace(math.log(lo), math.log(hi), count))
    return sorted({int(round(v)) for v in raw})


@dataclass
class FitOutcome:
    """What a method handle returns for one grid cell."""

    w: np.ndarray
    intercept: float = 0.0
    warm: Any = None


@dataclass
class GridCell:
    k: int | None
    hp: float
    score: float = math.nan
    w: np.ndarray | None = field(default=None, repr=False)
    intercept: float = 0.0
    error: str | None = None


@dataclass
class GridResult:
    best: GridCell
    table: list[GridCell]


def validation_score(w, intercept: float, valid: Dataset, criterion: str) -> float:
    if criterion == "mse":
        return mse(w, valid, intercept)
    if criterion == "auc":
        return auc(valid.X @ w + intercept, valid.y)
    raise ValueError(f"unknown criterion {criterion!r}")


def _better(a: GridCell, b: GridCell, criterion: str) -> bool:
    """Is ``a`` preferred to ``b``?  Ties go to smaller k, then smaller hp."""
    if a.score != b.score:
        return a.score < b.score if criterion == "mse" else a.score > b.score
    ka = -1 if a.k is None else a.k
    kb = -1 if b.k is None else b.k
    return (ka, a.hp) < (kb, b.hp)


def grid_search(fit: Callable[[Dataset, int | None, float, Any], FitOutcome],
                train: Dataset, valid: Dataset, k_grid: Sequence[int | None],
                schedule: Sequence[float], criterion: str = "mse",
                patience: int | None = None) -> GridResult:
    """Fit every ``(k, hp)`` cell on ``train`` and select on ``valid``.

    ``fit(train, k, hp, warm)`` is called along ``schedule`` for each ``k``
    with the previous cell's ``warm`` state.  With ``patience``, the schedule
    for a given ``k`` is abandoned after that many consecutive cells that do
    not improve on the best score seen for this ``k``.  Failing cells are
    logged and skipped.
    """
    if not len(k_grid) or not len(schedule):
        raise ValueError("grids must be non-empty")
    table: list[GridCell] = []
    best: GridCell | None = None
    for k in k_grid:
        warm = None
        best_k: GridCell | None = None
        stale = 0
        for hp in schedule:
            if patience is not None and stale >= patience:
                break
            cell = GridCell(k, float(hp))
            try:
                out = fit(train, k, float(hp), warm)
                warm = out.warm
                cell.w, cell.intercept = np.asarray(out.w, dtype=float), float(out.intercept)
                cell.score = validation_score(cell.w, cell.intercept, valid, criterion)
                if not math.isfinite(cell.score):
                    raise FloatingPointError("non-finite validation score")
            except Exception as exc:  # a failing cell must not stop the search
                cell.error = f"{type(exc).__name__}: {exc}"
                log.warning("grid cell k=%s hp=%g failed: %s", k, hp, cell.error)
            table.append(cell)
            if cell.error is None and (best_k is None or _better(cell, best_k, criterion)):
                best_k, stale = cell, 0
            else:
                stale += 1
            if cell.error is None and (best is None or _better(cell, best, criterion)):
                best = cell
    if best is None:
        raise RuntimeError("every grid cell failed")
    return GridResult(best, table)


def interpolate_counts(sizes, tf, ff, k_target: float) -> tuple[float, float]:
    """Linear interpolation of ``(TF, FF)`` at support size ``k_target``.

    Exact matches are returned as is (the first one in path order).
    """
    sizes = np.asarray(sizes, dtype=float)
    tf, ff = np.asarray(tf, dtype=float), np.asarray(ff, dtype=float)
    hit = np.flatnonzero(sizes == k_target)
    if hit.size:
        return float(tf[hit[0]]), float(ff[hit[0]])
    below = np.flatnonzero(sizes < k_target)
    above = np.flatnonzero(sizes > k_target)
    if not below.size or not above.size:
        raise OutOfRangeError(
            f"k={k_target} outside path support sizes [{sizes.min():g}, {sizes.max():g}]")
    # nearest bracketing sizes; within equal sizes keep the earliest point
    lo = below[np.argmax(sizes[below])]
    hi = above[np.argmin(sizes[above])]
    t = (k_target - sizes[lo]) / (sizes[hi] - sizes[lo])
    return float(tf[lo] + t * (tf[hi] - tf[lo])), float(ff[lo] + t * (ff[hi] - ff[lo]))


def sparsity_interpolate(path: RegPath, w_true, k_target: float) -> tuple[float, float]:
    """TF and FF of a regularisation path read off at support size ``k_target``."""
    counts = [selection_metrics(w, w_true) for w in path.solutions]
    return interpolate_counts(path.support_sizes, [c.tf for c in counts],
                              [c.ff for c in counts], k_target)
