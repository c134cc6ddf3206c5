"""Lasso / Elastic-Net, MCP and SCAD estimators by coordinate descent.

All fits minimise, on internally standardised columns,

    L(w) + sum_j pen(|w_j|)

where ``L`` is ``(1/2n) ||y - b - Xw||^2`` (OLS, intercept by centring) or
the mean logistic loss (intercept as an unpenalised coordinate, handled by
iteratively reweighted quadratic approximations).  Coefficients are mapped
back to the original column scale on output.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from numba import njit
from scipy.special import expit

from .datagen import Dataset
from .losses import LossKind, LossModel, validate_labels

ZERO_THRESHOLD = 1e-10
CD_TOL = 1e-7
IRLS_TOL = 1e-6
IRLS_WEIGHT_FLOOR = 1e-5
MAX_SWEEPS = 100_000
MAX_IRLS = 100
MIN_IRLS_STEP = 2.0 ** -30


class Family(str, Enum):
    L1 = "l1"
    ENET = "enet"
    MCP = "mcp"
    SCAD = "scad"


DEFAULT_SHAPE = {Family.MCP: 3.0, Family.SCAD: 3.7}


class ConvergenceWarning(RuntimeWarning):
    """Coordinate descent hit its iteration cap."""


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty family with its level ``lam`` and shape parameters.

    ``alpha_mix`` is the Elastic-Net L1 share (1 is the Lasso);
    ``shape`` is the concavity parameter of MCP (> 1) or SCAD (> 2).
    """

    family: Family = Family.L1
    lam: float = 0.0
    alpha_mix: float = 1.0
    shape: float | None = None

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if self.shape is None:
            object.__setattr__(self, "shape", DEFAULT_SHAPE.get(fam, math.inf))
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if not 0.0 <= self.alpha_mix <= 1.0:
            raise ValueError("alpha_mix must lie in [0, 1]")
        if fam is Family.MCP and not self.shape > 1:
            raise ValueError("MCP shape must exceed 1")
        if fam is Family.SCAD and not self.shape > 2:
            raise ValueError("SCAD shape must exceed 2")

    def at(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(self.family, lam, self.alpha_mix, self.shape)

    @property
    def zero_threshold(self) -> float:
        """Largest ``|gradient|`` at which ``w_j = 0`` stays coordinate-wise optimal."""
        if self.family is Family.ENET:
            return self.lam * self.alpha_mix
        return self.lam


@dataclass
class RegPath:
    """Solutions along a decreasing lambda sequence.

    ``solutions`` and ``intercepts`` are on the original column scale;
    ``objectives`` are those of the standardised problem that was solved.
    """

    lambdas: np.ndarray
    solutions: np.ndarray
    intercepts: np.ndarray
    support_sizes: np.ndarray
    objectives: np.ndarray
    converged: np.ndarray
    achieved_tol: np.ndarray
    spec: PenaltySpec
    sweep_objectives: list[list[float]] | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.lambdas)

    def support(self, i: int) -> np.ndarray:
        return np.flatnonzero(np.abs(self.solutions[i]) > ZERO_THRESHOLD)


def penalty_eval(spec: PenaltySpec, u):
    """Penalty value ``pen(u)`` for ``u >= 0`` (elementwise)."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("penalty argument must be nonnegative")
    lam, g = spec.lam, spec.shape
    fam = spec.family
    if fam is Family.L1:
        out = lam * u
    elif fam is Family.ENET:
        out = lam * (spec.alpha_mix * u + 0.5 * (1.0 - spec.alpha_mix) * u * u)
    elif fam is Family.MCP:
        out = np.where(u <= g * lam, lam * u - u * u / (2 * g), 0.5 * g * lam * lam)
    else:
        mid = (2 * g * lam * u - u * u - lam * lam) / (2 * (g - 1))
        out = np.where(u <= lam, lam * u,
                       np.where(u <= g * lam, mid, 0.5 * lam * lam * (g + 1)))
    return out[()] if out.ndim == 0 else out


def soft_threshold(z, t):
    """``sign(z) * max(|z| - t, 0)``."""
    z = np.asarray(z, dtype=float)
    out = np.sign(z) * np.maximum(np.abs(z) - t, 0.0)
    return out[()] if out.ndim == 0 else out


_CODE = {Family.L1: 0, Family.ENET: 1, Family.MCP: 2, Family.SCAD: 3}


@njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def _pen_scalar(code, lam, a, g, u):
    if code == 0:
        return lam * u
    if code == 1:
        return lam * (a * u + 0.5 * (1.0 - a) * u * u)
    if code == 2:
        if u <= g * lam:
            return lam * u - u * u / (2.0 * g)
        return 0.5 * g * lam * lam
    if u <= lam:
        return lam * u
    if u <= g * lam:
        return (2.0 * g * lam * u - u * u - lam * lam) / (2.0 * (g - 1.0))
    return 0.5 * lam * lam * (g + 1.0)


@njit(cache=True)
def _prox_piecewise(code, lam, a, g, z, nu):
    """Exact global minimiser of ``nu/2 w^2 - z w + pen(|w|)`` by piece enumeration.

    The penalty is quadratic on each piece, so every piece contributes its
    endpoints and, when strictly convex there, its stationary point.
    """
    if z == 0.0:
        return 0.0
    az = abs(z)
    # pieces as (start, end, quad, lin) with pen(u) = quad u^2 + lin u + const
    starts = np.zeros(3)
    ends = np.full(3, np.inf)
    quads = np.zeros(3)
    lins = np.zeros(3)
    if code == 2:
        m = 2
        ends[0], quads[0], lins[0] = g * lam, -0.5 / g, lam
        starts[1] = g * lam
    elif code == 3:
        m = 3
        ends[0], lins[0] = lam, lam
        starts[1], ends[1] = lam, g * lam
        quads[1], lins[1] = -0.5 / (g - 1.0), g * lam / (g - 1.0)
        starts[2] = g * lam
    else:
        m = 1
        quads[0] = 0.5 * lam * (1.0 - a) if code == 1 else 0.0
        lins[0] = lam * a if code == 1 else lam
    cands = np.empty(3 * m)
    c = 0
    for i in range(m):
        cands[c] = starts[i]
        c += 1
        if np.isfinite(ends[i]):
            cands[c] = ends[i]
            c += 1
        curv = nu + 2.0 * quads[i]
        if curv > 0.0:
            w = (az - lins[i]) / curv
            if starts[i] <= w <= ends[i]:
                cands[c] = w
                c += 1
    vals = cands[:c]
    vals.sort()
    best_w, best_v = 0.0, 0.0
    for w in vals:
        v = 0.5 * nu * w * w - az * w + _pen_scalar(code, lam, a, g, w)
        if v < best_v - 1e-15 * max(1.0, abs(best_v)):
            best_w, best_v = w, v
    return best_w if z > 0 else -best_w


@njit(cache=True)
def _prox_scalar(code, lam, a, g, z, nu):
    if code == 0:
        return _soft(z, lam) / nu
    if code == 1:
        return _soft(z, lam * a) / (nu + lam * (1.0 - a))
    if code == 2:
        if g * nu <= 1.0:
            return _prox_piecewise(code, lam, a, g, z, nu)
        if abs(z) <= g * lam * nu:
            return _soft(z, lam) / (nu - 1.0 / g)
        return z / nu
    if nu != 1.0:
        return _prox_piecewise(code, lam, a, g, z, nu)
    az = abs(z)
    if az <= 2.0 * lam:
        return _soft(z, lam)
    if az <= g * lam:
        s = 1.0 if z > 0 else -1.0
        return ((g - 1.0) * z - s * g * lam) / (g - 2.0)
    return z


def _params(spec: PenaltySpec):
    return _CODE[spec.family], float(spec.lam), float(spec.alpha_mix), float(spec.shape)


def univariate_prox(spec: PenaltySpec, z: float, nu: float = 1.0) -> float:
    """Global minimiser of ``nu/2 w^2 - z w + pen(|w|)``.

    Closed forms are used for the Lasso, Elastic-Net, MCP with
    ``shape * nu > 1`` (firm thresholding) and SCAD at ``nu = 1``; every
    other combination is solved exactly by enumerating the quadratic pieces.
    """
    if nu <= 0:
        raise ValueError("curvature must be positive")
    return float(_prox_scalar(*_params(spec), float(z), float(nu)))


@njit(cache=True)
def _sweep(Xs, r, w, W, nu, active, code, lam, a, g):
    """One cyclic pass over ``active``; ``r`` and ``w`` change in place.

    Coordinate ``j`` minimises ``(1/2n) sum_i W_i (r_i - x_ij d)^2 + pen``
    in the step ``d``.  Returns the largest coefficient change.
    """
    n = Xs.shape[0]
    delta = 0.0
    for j in active:
        acc = 0.0
        for i in range(n):
            acc += W[i] * Xs[i, j] * r[i]
        old = w[j]
        new = _prox_scalar(code, lam, a, g, acc / n + nu[j] * old, nu[j])
        if new != old:
            d = new - old
            for i in range(n):
                r[i] -= d * Xs[i, j]
            w[j] = new
            if abs(d) > delta:
                delta = abs(d)
    return delta


def _standardize(X: np.ndarray):
    mean = X.mean(axis=0)
    Xc = X - mean
    scale = np.sqrt(np.einsum("ij,ij->j", Xc, Xc) / X.shape[0])
    scale[scale == 0] = 1.0
    return Xc / scale, mean, scale


def _penalty_total(spec: PenaltySpec, w: np.ndarray) -> float:
    return float(np.sum(penalty_eval(spec, np.abs(w))))


@njit(cache=True)
def _movable(grad, w, nu, code, lam, a, g):
    """Zero coordinates whose univariate update would leave zero."""
    out = np.empty(w.size, dtype=np.int64)
    m = 0
    for j in range(w.size):
        if w[j] == 0.0 and _prox_scalar(code, lam, a, g, grad[j], nu[j]) != 0.0:
            out[m] = j
            m += 1
    return out[:m]


def _working_set_cd(Xs, r, w, W, nu, spec, tol, max_sweeps, grad_of, trace_of):
    """Cyclic coordinate descent on a working set grown by KKT checks.

    The working set starts at the nonzero coefficients; after it converges,
    coordinates at zero whose scaled gradient would move them are added.
    """
    params = _params(spec)
    active = np.flatnonzero(w)
    sweeps, achieved = 0, math.inf
    while True:
        while sweeps < max_sweeps:
            sweeps += 1
            achieved = _sweep(Xs, r, w, W, nu, active, *params) if active.size else 0.0
            if trace_of is not None:
                trace_of()
            if achieved <= tol:
                break
        else:
            return False, achieved, sweeps
        viol = np.setdiff1d(_movable(grad_of(), w, nu, *params), active)
        if viol.size == 0:
            return True, achieved, sweeps
        active = np.union1d(active, viol)


def _fit_ols(X, y, specs, tol, max_sweeps, record):
    n, p = X.shape
    Xs, mean, scale = _standardize(X)
    Xs = np.asfortranarray(Xs)
    ybar = float(y.mean())
    r = y - ybar
    w = np.zeros(p)
    W, nu = np.ones(n), np.ones(p)
    out = []
    for spec in specs:
        trace = [] if record else None
        trace_of = (lambda: trace.append(0.5 * float(r @ r) / n + _penalty_total(spec, w))) \
            if record else None
        ok, achieved, _ = _working_set_cd(Xs, r, w, W, nu, spec, tol, max_sweeps,
                                          lambda: Xs.T @ r / n, trace_of)
        obj = 0.5 * float(r @ r) / n + _penalty_total(spec, w)
        coef = w / scale
        out.append((coef, ybar - float(mean @ coef), obj, ok, achieved, trace))
    return out


def _logistic_objective(spec, eta, y01, w):
    # mean of log(1 + exp(eta)) - y01 * eta
    return float(np.mean(np.logaddexp(0.0, eta) - y01 * eta)) + _penalty_total(spec, w)


def _fit_logistic(X, y, specs, tol, max_sweeps, record):
    n, p = X.shape
    Xs, mean, scale = _standardize(X)
    Xs = np.asfortranarray(Xs)
    # the intercept is an unpenalised extra column of ones
    Xb = np.asfortranarray(np.column_stack([np.ones(n), Xs]))
    y01 = 0.5 * (y + 1.0)
    ybar = float(np.clip(y01.mean(), 1e-6, 1 - 1e-6))
    b = np.zeros(p + 1)
    b[0] = math.log(ybar / (1 - ybar))
    free = np.array([0])
    out = []
    for spec in specs:
        trace = [] if record else None
        ok, achieved, sweeps = False, math.inf, 0
        params = _params(spec)
        unpen = _params(spec.at(0.0))
        for _ in range(MAX_IRLS):
            eta = Xb @ b
            mu = expit(eta)
            W = np.maximum(mu * (1 - mu), IRLS_WEIGHT_FLOOR)
            r = (y01 - mu) / W
            nu = (W @ (Xb * Xb)) / n
            old = b.copy()
            w = b[1:]
            while sweeps < max_sweeps:
                sweeps += 1
                d0 = _sweep(Xb, r, b, W, nu, free, *unpen)
                ok_inner, d1, used = _working_set_cd(
                    Xs, r, w, W, nu[1:], spec, tol, max_sweeps - sweeps,
                    lambda: Xs.T @ (W * r) / n, None)
                sweeps += used
                if max(d0, d1) <= tol or not ok_inner:
                    break
            # backtrack towards the previous iterate until the true objective decreases;
            # undamped steps can cycle for the non-convex penalties
            before = _logistic_objective(spec, eta, y01, old[1:])
            step = b - old
            after = _logistic_objective(spec, Xb @ b, y01, b[1:])
            t = 1.0
            while after > before + 1e-12 * abs(before) and t > MIN_IRLS_STEP:
                t *= 0.5
                b[:] = old + t * step
                after = _logistic_objective(spec, Xb @ b, y01, b[1:])
            if after > before:
                b[:] = old
                after = before
            if trace is not None:
                trace.append(after)
            achieved = float(np.max(np.abs(b - old)))
            if sweeps >= max_sweeps:
                break
            if achieved <= IRLS_TOL:
                ok = True
                break
        obj = _logistic_objective(spec, Xb @ b, y01, b[1:])
        coef = b[1:] / scale
        out.append((coef, b[0] - float(mean @ coef), obj, ok, achieved, trace))
    return out


def lambda_max(data: Dataset, family=Family.L1, model: LossModel | None = None,
               alpha_mix: float = 1.0) -> float:
    """Smallest lambda at which the all-zero solution is optimal."""
    model = model or LossModel(LossKind.OLS)
    Xs, _, _ = _standardize(data.X)
    y = validate_labels(model, data.y)
    if model.kind is LossKind.LOGISTIC:
        resid = 0.5 * (y + 1.0)
    elif model.kind is LossKind.OLS:
        resid = y
    else:
        raise ValueError("penalised fits support the ols and logistic losses only")
    top = float(np.max(np.abs(Xs.T @ (resid - resid.mean())))) / data.n
    if Family(family) is Family.ENET:
        top /= max(alpha_mix, 1e-3)
    return top


def lambda_grid(data: Dataset, family=Family.L1, count: int = 100, ratio: float | None = None,
                model: LossModel | None = None, alpha_mix: float = 1.0) -> np.ndarray:
    """``count`` log-spaced values from ``lambda_max`` down to ``ratio * lambda_max``.

    ``ratio`` defaults to 1e-3 when ``n > p`` and 1e-2 otherwise.
    """
    if count < 2:
        raise ValueError("count must be at least 2")
    if ratio is None:
        ratio = 1e-3 if data.n > data.p else 1e-2
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    top = lambda_max(data, family, model, alpha_mix)
    if top <= 0:
        top = 1.0
    return top * np.exp(np.linspace(0.0, math.log(ratio), count))


def cd_fit(data: Dataset, model: LossModel | None = None, family=Family.L1,
           lambdas: Sequence[float] | None = None, alpha_mix: float = 1.0,
           shape: float | None = None, tol: float = CD_TOL, max_sweeps: int = MAX_SWEEPS,
           record_objective: bool = False) -> RegPath:
    """Coordinate-descent regularisation path.

    Parameters
    ----------
    data : Dataset
    model : LossModel, optional
        ``ols`` (default) or ``logistic``.
    family : Family or str
        ``l1``, ``enet``, ``mcp`` or ``scad``.
    lambdas : sequence of float, optional
        Strictly decreasing penalty levels; defaults to :func:`lambda_grid`.
    alpha_mix, shape : float
        Elastic-Net mixing and MCP/SCAD concavity.
    tol : float
        Convergence when the largest coefficient change in a sweep is below ``tol``.
    record_objective : bool
        Keep the objective after every sweep (OLS) or reweighting (logistic).

    Notes
    -----
    MCP and SCAD are non-convex; the path returns the stationary point
    reached by warm-starting down the lambda sequence.
    """
    model = model or LossModel(LossKind.OLS)
    if model.kind not in (LossKind.OLS, LossKind.LOGISTIC):
        raise ValueError("penalised fits support the ols and logistic losses only")
    y = validate_labels(model, data.y)
    template = PenaltySpec(family, 0.0, alpha_mix, shape)
    if lambdas is None:
        lambdas = lambda_grid(data, template.family, model=model, alpha_mix=alpha_mix)
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or lambdas.size == 0:
        raise ValueError("lambdas must be a non-empty sequence")
    if np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambdas must be strictly decreasing")
    specs = [template.at(float(l)) for l in lambdas]
    fit = _fit_ols if model.kind is LossKind.OLS else _fit_logistic
    rows = fit(data.X, y, specs, tol, max_sweeps, record_objective)
    coef = np.array([r[0] for r in rows]).reshape(len(rows), data.p)
    converged = np.array([r[3] for r in rows])
    if not converged.all():
        bad = lambdas[~converged]
        warnings.warn(f"coordinate descent did not converge at {bad.size} lambda values "
                      f"(largest achieved change {max(r[4] for r in rows):.3g})",
                      ConvergenceWarning, stacklevel=2)
    coef[np.abs(coef) <= ZERO_THRESHOLD] = 0.0
    return RegPath(
        lambdas=lambdas,
        solutions=coef,
        intercepts=np.array([r[1] for r in rows]),
        support_sizes=np.count_nonzero(coef, axis=1),
        objectives=np.array([r[2] for r in rows]),
        converged=converged,
        achieved_tol=np.array([r[4] for r in rows]),
        spec=template,
        sweep_objectives=[r[5] for r in rows] if record_objective else None,
    )


def write_path(path: RegPath, dest) -> None:
    """Rows ``lambda, support_size, objective, j:w_j ...`` (0-based indices).

    ``dest`` is a file path or an open text stream.
    """
    if hasattr(dest, "write"):
        _write_path_rows(path, dest)
        return
    with open(dest, "w", newline="") as fh:
        _write_path_rows(path, fh)


def _write_path_rows(path: RegPath, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["lambda", "support_size", "objective", "coefficients"])
    for lam, size, obj, coef in zip(path.lambdas, path.support_sizes, path.objectives,
                                    path.solutions):
        pairs = [f"{j}:{coef[j]!r}" for j in np.flatnonzero(coef)]
        w.writerow([repr(float(lam)), int(size), repr(float(obj)), *pairs])
