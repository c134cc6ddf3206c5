"""Adapters turning every estimator into ``fit(train, valid) -> MethodFit``.

Subset methods (cio, ss) fit on centred data without intercept and recover
it from the training means; the ridge level is chosen on the validation set
along a doubling schedule.  Penalised methods fit a lambda path and either
calibrate lambda to an exact support size or pick it on validation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..cio import coefficients_from_support, cutting_plane_solve
from ..datagen import Dataset, Task
from ..losses import LossKind, LossModel
from ..metrics import selection_metrics
from ..penalties import Family, cd_fit, lambda_grid
from ..saddle import SubgradientConfig, subgradient_solve
from ..tuning import FitOutcome, default_k_grid, gamma_schedule, grid_search, interpolate_counts
from .config import SolverSettings

SUBSET = ("cio", "ss")
PENALISED = {"lasso": Family.L1, "enet": Family.ENET, "mcp": Family.MCP, "scad": Family.SCAD}


@dataclass
class MethodFit:
    w: np.ndarray
    intercept: float
    k: int | None
    hp: float
    val_score: float
    note: str = ""


@dataclass
class RocPoint:
    k: int
    tf: float
    ff: float
    hp: float = math.nan
    note: str = ""


@dataclass
class Context:
    """What every adapter needs besides the data."""

    task: Task
    settings: SolverSettings = field(default_factory=SolverSettings)

    @property
    def criterion(self) -> str:
        return "auc" if self.task is Task.CLASSIFICATION else "mse"

    def subset_loss(self) -> LossModel:
        return LossModel(LossKind.HINGE if self.task is Task.CLASSIFICATION else LossKind.OLS)

    def penalised_loss(self) -> LossModel:
        return LossModel(LossKind.LOGISTIC if self.task is Task.CLASSIFICATION else LossKind.OLS)


def _centre(train: Dataset, task: Task):
    xm = train.X.mean(axis=0)
    ym = 0.0 if task is Task.CLASSIFICATION else float(train.y.mean())
    return Dataset(train.X - xm, train.y - ym, train.w_true), xm, ym


# ------------------------------------------------------------- subset methods

def _subset_handle(method: str, ctx: Context):
    model = ctx.subset_loss()
    s = ctx.settings
    notes = {}

    def fit(train: Dataset, k, gamma, warm):
        centred, xm, ym = _centre(train, ctx.task)
        if method == "cio":
            res = cutting_plane_solve(centred, model, k, gamma, warm=warm,
                                      epsilon=s.cio_epsilon, time_limit=s.cio_time_limit,
                                      max_iterations=s.cio_max_iterations,
                                      saddle_cfg=SubgradientConfig(gamma=gamma, t_max=s.ss_t_max,
                                                                   gap_tol=s.ss_gap_tol))
            support, next_warm = res.support, res.support
            notes[(k, gamma)] = "certified" if res.certified else "time_limit"
        else:
            cfg = SubgradientConfig(gamma=gamma, t_max=s.ss_t_max, gap_tol=s.ss_gap_tol)
            res = subgradient_solve(centred, model, k, cfg, warm_alpha=warm)
            support, next_warm = res.support, res.alpha_avg
            notes[(k, gamma)] = f"gap={res.gap:.3g}"
        w = coefficients_from_support(support, centred, model, gamma)
        return FitOutcome(w, ym - float(xm @ w), next_warm)

    return fit, notes


def _schedule(train: Dataset, k: int, s: SolverSettings) -> np.ndarray:
    return gamma_schedule(train, s.gamma_steps, k if s.gamma_normalized else None, s.gamma_factor)


def fit_subset(method: str, train: Dataset, valid: Dataset, k_grid, ctx: Context) -> MethodFit:
    """Best ``(k, gamma)`` cell on validation; the schedule uses the largest ``k``."""
    fit, notes = _subset_handle(method, ctx)
    schedule = _schedule(train, max(k_grid), ctx.settings)
    res = grid_search(fit, train, valid, list(k_grid), schedule, ctx.criterion,
                      ctx.settings.gamma_patience)
    b = res.best
    return MethodFit(b.w, b.intercept, b.k, b.hp, b.score, notes.get((b.k, b.hp), ""))


# ---------------------------------------------------------- penalised methods

def _hp_grid(method: str, s: SolverSettings):
    """(alpha_mix, shape) pairs cross-validated besides lambda."""
    if method == "enet":
        return [(a, None) for a in s.enet_alphas]
    if method == "mcp":
        return [(1.0, s.mcp_shape)]
    if method == "scad":
        return [(1.0, s.scad_shape)]
    return [(1.0, None)]


def _path(method, train, ctx: Context, alpha, shape, lambdas=None):
    model = ctx.penalised_loss()
    fam = PENALISED[method]
    if lambdas is None:
        lambdas = lambda_grid(train, fam, ctx.settings.lambda_count, ctx.settings.lambda_ratio,
                              model=model, alpha_mix=alpha)
    return cd_fit(train, model, fam, lambdas, alpha_mix=alpha, shape=shape)


def _score(w, b, valid: Dataset, ctx: Context) -> float:
    from ..tuning import validation_score

    return validation_score(w, b, valid, ctx.criterion)


def _prefer(score, best, ctx: Context) -> bool:
    if best is None:
        return True
    return score < best if ctx.criterion == "mse" else score > best


def _calibrate(method, train, ctx: Context, alpha, shape, k):
    """Path points with exactly ``k`` nonzeros, bisecting lambda when the grid misses ``k``.

    Returns ``(points, exact)`` where points are ``(w, b, lam)`` triples.
    """
    path = _path(method, train, ctx, alpha, shape)
    sizes = path.support_sizes
    hits = np.flatnonzero(sizes == k)
    if hits.size:
        return [(path.solutions[i], path.intercepts[i], path.lambdas[i]) for i in hits], True
    above = np.flatnonzero(sizes > k)
    if above.size and above[0] > 0:
        hi_lam, lo_lam = path.lambdas[above[0] - 1], path.lambdas[above[0]]
        for _ in range(ctx.settings.calibrate_steps):
            mid = math.sqrt(hi_lam * lo_lam)
            one = _path(method, train, ctx, alpha, shape, [mid])
            size = int(one.support_sizes[0])
            if size == k:
                return [(one.solutions[0], one.intercepts[0], mid)], True
            if size < k:
                hi_lam = mid
            else:
                lo_lam = mid
    # closest size from below, else from above
    below = np.flatnonzero(sizes < k)
    i = below[np.argmax(sizes[below])] if below.size else above[np.argmin(sizes[above])]
    return [(path.solutions[i], path.intercepts[i], path.lambdas[i])], False


def fit_penalised_fixed_k(method: str, train: Dataset, valid: Dataset, k: int,
                          ctx: Context) -> MethodFit:
    best, best_score, exact_any = None, None, False
    for alpha, shape in _hp_grid(method, ctx.settings):
        points, exact = _calibrate(method, train, ctx, alpha, shape, k)
        if exact_any and not exact:
            continue
        if exact and not exact_any:
            best, best_score, exact_any = None, None, True
        for w, b, lam in points:
            score = _score(w, b, valid, ctx)
            if _prefer(score, best_score, ctx):
                best, best_score = MethodFit(w, b, k, float(lam), score), score
    best.k = int(np.count_nonzero(best.w))
    best.note = "exact_k" if exact_any else "nearest_k"
    return best


def fit_penalised_cv(method: str, train: Dataset, valid: Dataset, ctx: Context) -> MethodFit:
    best, best_score = None, None
    for alpha, shape in _hp_grid(method, ctx.settings):
        path = _path(method, train, ctx, alpha, shape)
        for w, b, lam in zip(path.solutions, path.intercepts, path.lambdas):
            score = _score(w, b, valid, ctx)
            if _prefer(score, best_score, ctx):
                best = MethodFit(w, b, int(np.count_nonzero(w)), float(lam), score)
                best_score = score
    return best


# --------------------------------------------------------------- protocols

def fit_fixed_k(method: str, train: Dataset, valid: Dataset, k: int, ctx: Context) -> MethodFit:
    if method in SUBSET:
        return fit_subset(method, train, valid, [k], ctx)
    return fit_penalised_fixed_k(method, train, valid, k, ctx)


def fit_cv_k(method: str, train: Dataset, valid: Dataset, k_grid, ctx: Context) -> MethodFit:
    if method in SUBSET:
        return fit_subset(method, train, valid, k_grid, ctx)
    return fit_penalised_cv(method, train, valid, ctx)


def roc_points(method: str, train: Dataset, valid: Dataset, k_grid, ctx: Context) -> list[RocPoint]:
    """(TF, FF) at every ``k`` of the grid, other hyper-parameters tuned on validation.

    Penalised methods read the counts off their validation-best path by
    linear interpolation in the support size.
    """
    w_true = train.w_true
    out = []
    if method in SUBSET:
        for k in k_grid:
            f = fit_subset(method, train, valid, [k], ctx)
            m = selection_metrics(f.w, w_true)
            out.append(RocPoint(k, m.tf, m.ff, f.hp, f.note))
        return out
    best_path, best_score = None, None
    for alpha, shape in _hp_grid(method, ctx.settings):
        path = _path(method, train, ctx, alpha, shape)
        score = max(_score(w, b, valid, ctx) for w, b in zip(path.solutions, path.intercepts)) \
            if ctx.criterion == "auc" else \
            min(_score(w, b, valid, ctx) for w, b in zip(path.solutions, path.intercepts))
        if _prefer(score, best_score, ctx):
            best_path, best_score = path, score
    counts = [selection_metrics(w, w_true) for w in best_path.solutions]
    sizes = best_path.support_sizes
    for k in k_grid:
        try:
            tf, ff = interpolate_counts(sizes, [c.tf for c in counts], [c.ff for c in counts], k)
            out.append(RocPoint(k, tf, ff, note="interpolated"))
        except ValueError as exc:
            out.append(RocPoint(k, math.nan, math.nan, note=f"out_of_range: {exc}"))
    return out


def k_grid_for(cfg_k_grid, p: int, n: int, k_true: int | None):
    return list(cfg_k_grid) if cfg_k_grid else default_k_grid(p, n, k_true)
