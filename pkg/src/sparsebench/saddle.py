"""Boolean relaxation of ridge-regularised subset selection.

The relaxed problem is the saddle point

    min_{s in [0,1]^p, sum(s) <= k}  max_alpha  f(alpha, s)
    f(alpha, s) = -sum_i conj(y_i, alpha_i) - gamma/2 * sum_j s_j (X_j' alpha)^2

solved by projected sub-gradient ascent on ``alpha`` with exact partial
minimisation in ``s`` (a sort of the scores ``(X_j' alpha)^2``).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .datagen import Dataset
from .losses import (
    DomainError,
    LossKind,
    LossModel,
    _conjugate_grad,
    conjugate_domain_project,
    conjugate_eval,
    initial_dual,
    validate_labels,
)

MIN_STEP = 1e-12


@dataclass(frozen=True)
class Support:
    """Sorted, duplicate-free feature indices with the budget they were chosen under."""

    selected: tuple[int, ...]
    k: int | None = None

    def __post_init__(self):
        sel = tuple(sorted(int(j) for j in self.selected))
        if len(set(sel)) != len(sel):
            raise ValueError("support indices must be distinct")
        if sel and sel[0] < 0:
            raise ValueError("support indices must be nonnegative")
        if self.k is not None and len(sel) > self.k:
            raise ValueError("support larger than its budget")
        object.__setattr__(self, "selected", sel)

    @classmethod
    def from_mask(cls, mask, k: int | None = None) -> "Support":
        return cls(tuple(np.flatnonzero(mask)), k)

    @property
    def indices(self) -> np.ndarray:
        return np.asarray(self.selected, dtype=int)

    def mask(self, p: int) -> np.ndarray:
        m = np.zeros(p, dtype=bool)
        m[self.indices] = True
        return m

    def __len__(self):
        return len(self.selected)

    def __iter__(self):
        return iter(self.selected)


class StepRule(str, Enum):
    CONSTANT = "constant"
    ADAPTIVE = "adaptive"


@dataclass
class SubgradientConfig:
    """Settings of the dual sub-gradient method.

    ``track_best_primal=None`` resolves per loss: on for OLS (closed-form
    primal values) and off otherwise.  ``patience`` stops after that many
    iterations without improving the best primal value; ``None`` disables it.
    """

    t_max: int = 200
    gap_tol: float = 1e-4
    step_rule: StepRule = StepRule.ADAPTIVE
    delta: float = 1e-3
    gamma: float = 1.0
    track_best_primal: bool | None = None
    patience: int | None = None

    def __post_init__(self):
        self.step_rule = StepRule(self.step_rule)
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.step_rule is StepRule.CONSTANT and self.delta <= 0:
            raise ValueError("constant step size must be positive")
        if self.t_max < 1:
            raise ValueError("t_max must be at least 1")


@dataclass
class SaddleState:
    alpha: np.ndarray
    alpha_sum: np.ndarray
    t: int = 0
    best_upper: float = math.inf
    best_lower: float = -math.inf
    incumbent: Support | None = None


@dataclass
class SaddleResult:
    support: Support
    alpha_avg: np.ndarray
    gap: float
    iterations: int
    trace: list[dict] = field(default_factory=list)
    upper: float = math.inf
    lower: float = -math.inf
    alpha_last: np.ndarray | None = None


class SubgradientError(RuntimeError):
    """Non-finite sub-gradient encountered."""


def dual_function(alpha, support, data: Dataset, model: LossModel, gamma: float) -> float:
    """Exact value of ``f(alpha, s)`` for a binary support."""
    alpha = np.asarray(alpha, dtype=float)
    conj = conjugate_eval(model, data.y, alpha)
    if not np.all(np.isfinite(conj)):
        raise DomainError("alpha outside the conjugate domain")
    idx = _as_indices(support)
    z = data.X[:, idx].T @ alpha
    return float(-conj.sum() - 0.5 * gamma * (z @ z))


def _as_indices(support) -> np.ndarray:
    if isinstance(support, Support):
        return support.indices
    return np.asarray(sorted(int(j) for j in support), dtype=int)


def top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest scores, ties broken by lowest index."""
    order = np.argsort(-scores, kind="stable")
    return np.sort(order[:k])


def partial_min_support(alpha, data: Dataset, gamma: float, k: int) -> Support:
    """Minimiser of ``f(alpha, .)`` over ``{s binary, sum(s) = k}``."""
    if k > data.p:
        raise ValueError(f"k={k} exceeds the number of features p={data.p}")
    if k < 0:
        raise ValueError("k must be nonnegative")
    z = data.X.T @ np.asarray(alpha, dtype=float)
    return Support(tuple(top_k(z * z, k)), k)


def adaptive_step(state: SaddleState, grad_norm_sq: float) -> float:
    """Polyak-type step ``(best_upper - best_lower) / ||g||^2``."""
    if grad_norm_sq <= 0.0:
        return 0.0
    gap = state.best_upper - state.best_lower
    if not math.isfinite(state.best_upper):
        raise ValueError("adaptive step needs at least one primal value")
    if gap <= 0.0:
        return 0.0
    return max(gap / grad_norm_sq, MIN_STEP)


def _relative_gap(upper: float, lower: float) -> float:
    return (upper - lower) / max(1.0, abs(upper))


class _PrimalCache:
    """Memoised ``c(s)`` for supports visited by the dual iteration."""

    def __init__(self, data, model, gamma):
        from .cio import inner_value_grad

        self._inner = inner_value_grad
        self.data, self.model, self.gamma = data, model, gamma
        self.values: dict[tuple[int, ...], float] = {}
        self._alpha = None

    def __call__(self, support: Support) -> float:
        key = support.selected
        if key not in self.values:
            res = self._inner(support, self.data, self.model, self.gamma, alpha0=self._alpha)
            if self.model.kind is not LossKind.OLS:
                self._alpha = res.alpha_star
            self.values[key] = res.value
        return self.values[key]


def _initial_alpha(data: Dataset, model: LossModel, gamma: float) -> np.ndarray:
    col_sq = float(np.mean(np.einsum("ij,ij->j", data.X, data.X))) if data.p else 0.0
    alpha = initial_dual(model, data.y, 1.0 + gamma * col_sq)
    return conjugate_domain_project(model, data.y, alpha)


def _run(data: Dataset, model: LossModel, cfg: SubgradientConfig, select, warm_alpha,
         penalty: float = 0.0):
    """Shared dual sub-gradient loop; ``select(scores)`` is the s-update."""
    y = validate_labels(model, data.y)
    X, gamma = data.X, cfg.gamma
    track = cfg.track_best_primal
    if track is None:
        track = model.kind is LossKind.OLS
    primal = _PrimalCache(data, model, gamma)
    need_primal = track or cfg.step_rule is StepRule.ADAPTIVE
    if warm_alpha is None:
        alpha = _initial_alpha(data, model, gamma)
        init_note = "heuristic"
    else:
        alpha = conjugate_domain_project(model, y, np.asarray(warm_alpha, dtype=float))
        init_note = "warm"
    state = SaddleState(alpha=alpha, alpha_sum=np.zeros_like(alpha))
    trace: list[dict] = []
    since_improved = 0
    scores = None
    for t in range(cfg.t_max):
        z = X.T @ state.alpha
        scores = z * z
        support = select(scores)
        idx = support.indices
        z_s = z[idx]
        conj = conjugate_eval(model, y, state.alpha)
        lower = float(-conj.sum() - 0.5 * gamma * (z_s @ z_s)) + penalty * len(idx)
        upper = primal(support) + penalty * len(idx) if need_primal else math.inf
        state.alpha_sum += state.alpha
        state.t = t + 1
        if upper < state.best_upper - 1e-15 * max(1.0, abs(upper)):
            state.best_upper, state.incumbent = upper, support
            since_improved = 0
        else:
            since_improved += 1
        state.best_lower = max(state.best_lower, lower)
        grad = -_conjugate_grad(model, y, state.alpha) - gamma * (X[:, idx] @ z_s)
        gsq = float(grad @ grad)
        if not math.isfinite(gsq):
            raise SubgradientError(f"non-finite sub-gradient at iteration {t}")
        if cfg.step_rule is StepRule.ADAPTIVE:
            delta = adaptive_step(state, gsq)
        else:
            delta = cfg.delta
        gap = _relative_gap(state.best_upper, state.best_lower)
        trace.append({
            "t": t, "f": lower, "c": upper, "delta": delta, "gap": gap,
            "best_upper": state.best_upper, "best_lower": state.best_lower,
            "grad_norm_sq": gsq, "size": len(idx), "init": init_note,
        })
        if gap <= cfg.gap_tol or gsq == 0.0 or delta == 0.0:
            break
        if cfg.patience is not None and since_improved >= cfg.patience:
            break
        state.alpha = conjugate_domain_project(model, y, state.alpha + delta * grad)

    alpha_avg = state.alpha_sum / state.t
    final = select((X.T @ alpha_avg) ** 2)
    chosen = final
    if track:
        c_final = primal(final) + penalty * len(final)
        if c_final < state.best_upper:
            state.best_upper, state.incumbent = c_final, final
        chosen = state.incumbent
    return SaddleResult(
        support=chosen,
        alpha_avg=alpha_avg,
        gap=_relative_gap(state.best_upper, state.best_lower),
        iterations=state.t,
        trace=trace,
        upper=state.best_upper,
        lower=state.best_lower,
        alpha_last=state.alpha,
    )


def subgradient_solve(data: Dataset, model: LossModel, k: int,
                      cfg: SubgradientConfig | None = None, warm_alpha=None) -> SaddleResult:
    """Dual sub-gradient method for the cardinality-constrained relaxation.

    Returns the support recovered from the averaged dual iterate, or, with
    ``track_best_primal``, the visited support of smallest primal value.
    Supports always contain exactly ``min(k, p)`` features.
    """
    cfg = cfg or SubgradientConfig()
    if not 1 <= k:
        raise ValueError("k must be at least 1")
    kk = min(k, data.p)
    return _run(data, model, cfg, lambda sc: Support(tuple(top_k(sc, kk)), k), warm_alpha)


def penalized_solve(data: Dataset, model: LossModel, lam: float,
                    cfg: SubgradientConfig | None = None, warm_alpha=None) -> SaddleResult:
    """Dual sub-gradient method for the cardinality-penalised relaxation.

    The s-update keeps every feature with ``lam - gamma/2 (X_j' alpha)^2 < 0``.
    Bounds in the result include the ``lam * |s|`` term.
    """
    cfg = cfg or SubgradientConfig()
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    half_gamma = 0.5 * cfg.gamma

    def select(scores):
        return Support(tuple(np.flatnonzero(lam - half_gamma * scores < 0)))

    return _run(data, model, cfg, select, warm_alpha, penalty=lam)


def penalized_margins(alpha, data: Dataset, gamma: float, lam: float) -> np.ndarray:
    """Entries ``lam - gamma/2 (X_j' alpha)^2`` whose signs fix the penalised support."""
    z = data.X.T @ np.asarray(alpha, dtype=float)
    return lam - 0.5 * gamma * z * z


def write_trace(trace: list[dict], path) -> None:
    """Per-iteration rows ``t, f, c, delta, gap`` as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "f", "c", "delta", "gap"])
        for row in trace:
            w.writerow([row["t"], repr(row["f"]), repr(row["c"]), repr(row["delta"]), repr(row["gap"])])
