"""Exact ridge-regularised subset selection by outer approximation.

The convex map ``c(s) = max_alpha f(alpha, s)`` is minimised over binary
supports of size at most ``k`` by accumulating tangent cuts
``eta >= c(s_i) + grad c(s_i)' (s - s_i)`` and re-solving the piecewise
linear master problem with a small branch-and-bound.
"""
from __future__ import annotations

import csv
import itertools
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .datagen import Dataset
from .losses import LossKind, LossModel, conjugate_bounds, conjugate_eval, validate_labels
from .saddle import Support, SubgradientConfig

INNER_TOL = 1e-8
INNER_MAX_SWEEPS = 10_000
ENUMERATION_MAX_P = 20
ENUMERATION_MAX_COUNT = 200_000


class InnerSolveWarning(RuntimeWarning):
    """Coordinate ascent stopped before reaching its tolerance."""


@dataclass
class InnerResult:
    value: float
    grad: np.ndarray
    alpha_star: np.ndarray
    converged: bool = True
    achieved_tol: float = 0.0
    sweeps: int = 0


def _columns_and_weights(s, p: int):
    """Normalise a support (indices) or a relaxed vector in [0,1]^p."""
    if isinstance(s, Support):
        idx = s.indices
        return idx, np.ones(idx.size)
    arr = np.asarray(s)
    if arr.dtype.kind == "f" and arr.shape == (p,):
        idx = np.flatnonzero(arr)
        return idx, arr[idx].astype(float)
    idx = np.asarray(sorted(int(j) for j in arr.ravel()), dtype=int)
    return idx, np.ones(idx.size)


def _ols_alpha(B: np.ndarray, y: np.ndarray, gamma: float) -> np.ndarray:
    """``-(I + gamma B B')^{-1} y`` with a Woodbury solve when ``B`` is thin."""
    n, m = B.shape
    if m == 0:
        return -y.copy()
    if m < n:
        inner = np.eye(m) + gamma * (B.T @ B)
        sol = cho_solve(cho_factor(inner), B.T @ y)
        return -(y - gamma * (B @ sol))
    full = np.eye(n) + gamma * (B @ B.T)
    return -cho_solve(cho_factor(full), y)


def _piecewise_params(model: LossModel):
    # conj(y, a) = 0.5*quad*a^2 + y*a + eps*|a| on the domain, for every kind but logistic
    kind = model.kind
    quad = 1.0 if kind in (LossKind.OLS, LossKind.L2SVM, LossKind.L2SVR) else 0.0
    eps = model.svr_epsilon if kind in (LossKind.L1SVR, LossKind.L2SVR) else 0.0
    return quad, eps


def _coord_max_piecewise(yi, c, q, gamma, quad, eps, lo, hi):
    # maximise -(0.5*(quad + gamma*q) a^2 + (yi + gamma*c) a + eps*|a|) over [lo, hi]
    b = yi + gamma * c
    curv = quad + gamma * q
    if curv > 0:
        shrunk = math.copysign(max(abs(b) - eps, 0.0), b)
        return min(max(-shrunk / curv, lo), hi)
    best, best_val = 0.0, -math.inf
    for a in (lo, 0.0, hi):
        if lo <= a <= hi and math.isfinite(a):
            val = -(b * a + eps * abs(a))
            if val > best_val:
                best, best_val = a, val
    return best


def _coord_max_logistic(yi, c, q, gamma, tau):
    # x = -y a in [tau, 1 - tau]; maximise H(x) - gamma/2 q x^2 + gamma c y x
    def deriv(x):
        return math.log((1.0 - x) / x) - gamma * q * x + gamma * c * yi

    lo, hi = tau, 1.0 - tau
    if deriv(lo) <= 0.0:
        return -yi * lo
    if deriv(hi) >= 0.0:
        return -yi * hi
    x = 0.5
    for _ in range(100):
        d = deriv(x)
        if d > 0:
            lo = x
        else:
            hi = x
        step = d / (1.0 / (x * (1.0 - x)) + gamma * q)
        nx = x + step
        if not lo < nx < hi:
            nx = 0.5 * (lo + hi)
        if abs(nx - x) < 1e-15 or hi - lo < 1e-15:
            x = nx
            break
        x = nx
    return -yi * x


def _coordinate_ascent(B, y, model: LossModel, gamma: float, alpha0=None,
                       tol: float = INNER_TOL, max_sweeps: int = INNER_MAX_SWEEPS):
    """Cyclic exact coordinate ascent on the dual over the box domain."""
    n = B.shape[0]
    lo, hi = conjugate_bounds(model, y)
    if model.kind is LossKind.LOGISTIC:
        tau = model.logistic_clamp
        lo = np.where(y > 0, -1.0 + tau, tau)
        hi = np.where(y > 0, -tau, 1.0 - tau)
    if alpha0 is None:
        alpha = np.clip(-0.5 * y, lo, hi) if model.is_classification else np.clip(-y, lo, hi)
    else:
        alpha = np.clip(np.asarray(alpha0, dtype=float), lo, hi)
    v = B.T @ alpha
    q = np.einsum("ij,ij->i", B, B)
    quad, eps = _piecewise_params(model)
    logistic = model.kind is LossKind.LOGISTIC
    tau = model.logistic_clamp
    rows = [B[i] for i in range(n)]
    change = math.inf
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        change = 0.0
        for i in range(n):
            bi = rows[i]
            ai = alpha[i]
            c = float(bi @ v) - q[i] * ai
            if logistic:
                new = _coord_max_logistic(y[i], c, q[i], gamma, tau)
            else:
                new = _coord_max_piecewise(y[i], c, q[i], gamma, quad, eps, lo[i], hi[i])
            d = new - ai
            if d != 0.0:
                alpha[i] = new
                v += d * bi
                change = max(change, abs(d))
        if change <= tol:
            break
    return alpha, change <= tol, change, sweeps


def inner_value_grad(s, data: Dataset, model: LossModel, gamma: float, alpha0=None,
                     tol: float = INNER_TOL, max_sweeps: int = INNER_MAX_SWEEPS) -> InnerResult:
    """Value ``c(s)``, gradient and maximiser ``alpha*(s)`` of the inner problem.

    ``s`` is a :class:`Support`, a sequence of column indices, or a float
    vector of length ``p`` in ``[0, 1]^p`` (the relaxed map, linear in ``s``).
    OLS uses the closed form; other losses use exact coordinate ascent.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    y = validate_labels(model, data.y)
    idx, weights = _columns_and_weights(s, data.p)
    B = data.X[:, idx] * np.sqrt(weights)
    if model.kind is LossKind.OLS:
        alpha = _ols_alpha(B, y, gamma)
        value = -0.5 * float(y @ alpha)
        converged, achieved, sweeps = True, 0.0, 0
    else:
        alpha, converged, achieved, sweeps = _coordinate_ascent(
            B, y, model, gamma, alpha0, tol, max_sweeps)
        if not converged:
            warnings.warn(f"inner coordinate ascent stopped after {sweeps} sweeps with "
                          f"max change {achieved:.3g} > {tol:g}", InnerSolveWarning, stacklevel=2)
        v = B.T @ alpha
        value = float(-conjugate_eval(model, y, alpha).sum() - 0.5 * gamma * (v @ v))
    z = data.X.T @ alpha
    return InnerResult(value, -0.5 * gamma * z * z, alpha, converged, achieved, sweeps)


def coefficients_from_support(support, data: Dataset, model: LossModel, gamma: float,
                              alpha_star=None) -> np.ndarray:
    """Primal weights for a fixed support, zero off the support.

    From the optimality conditions of the ridge-regularised fit,
    ``w_S = -gamma X_S' alpha*(S)``.
    """
    idx, _ = _columns_and_weights(support, data.p)
    w = np.zeros(data.p)
    if idx.size == 0:
        return w
    if alpha_star is None:
        alpha_star = inner_value_grad(Support(tuple(idx)), data, model, gamma).alpha_star
    w[idx] = -gamma * (data.X[:, idx].T @ alpha_star)
    return w


class CutPool:
    """Tangent cuts of ``c`` stored as ``eta >= intercept + grad' s``."""

    def __init__(self, p: int, epsilon: float = 1e-4, time_limit: float | None = 60.0):
        self.p = p
        self.epsilon = epsilon
        self.time_limit = time_limit
        self.values: list[float] = []
        self.grads: list[np.ndarray] = []
        self.at: list[Support] = []
        self._G = np.zeros((0, p))
        self._a = np.zeros(0)

    def __len__(self):
        return len(self.values)

    def add(self, value: float, grad, at) -> None:
        support = at if isinstance(at, Support) else Support(tuple(at))
        grad = np.asarray(grad, dtype=float)
        self.values.append(float(value))
        self.grads.append(grad)
        self.at.append(support)
        self._G = np.vstack([self._G, grad])
        self._a = np.append(self._a, float(value) - grad[support.indices].sum())

    @property
    def cuts(self):
        return list(zip(self.values, self.grads, self.at))

    @property
    def intercepts(self) -> np.ndarray:
        return self._a

    @property
    def gradients(self) -> np.ndarray:
        return self._G

    def model_value(self, support) -> float:
        idx, _ = _columns_and_weights(support, self.p)
        return float(np.max(self._a + self._G[:, idx].sum(axis=1)))


@dataclass
class MasterResult:
    support: Support | None
    eta: float
    bound: float
    complete: bool
    nodes: int = 0


def _enumerate_master(pool: CutPool, k: int, cutoff: float):
    p = pool.p
    G, a = pool.gradients, pool.intercepts
    best_val, best = float(a.max()), np.zeros(0, dtype=int)
    for size in range(1, min(k, p) + 1):
        combos = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(p), size)),
                             dtype=int).reshape(-1, size)
        for start in range(0, combos.shape[0], 20_000):
            chunk = combos[start:start + 20_000]
            vals = (a[None, :] + G.T[chunk].sum(axis=1)).max(axis=1)
            i = int(np.argmin(vals))
            if vals[i] < best_val - 1e-12:
                best_val, best = float(vals[i]), chunk[i]
    support = Support(tuple(best), k)
    return MasterResult(support if best_val < cutoff else None, best_val, best_val, True, 0)


def _enumeration_count(p: int, k: int) -> int:
    return sum(math.comb(p, j) for j in range(0, min(k, p) + 1))


def solve_master(pool: CutPool, p: int, k: int, incumbent=None, cutoff: float = math.inf,
                 deadline: float | None = None, max_nodes: int | None = None,
                 tol: float = 1e-10) -> MasterResult:
    """Minimise ``max_i (a_i + g_i' s)`` over binary ``s`` with ``sum(s) <= k``.

    Depth-first branch-and-bound whose node bound is the best single-cut
    relaxation (each single cut is minimised by picking its most negative
    free coefficients).  Subtrees whose bound reaches ``cutoff`` are pruned;
    ``bound`` is then a valid lower bound on the master optimum and
    ``support`` is ``None`` if nothing beats the cutoff.  Small problems are
    enumerated.
    """
    if len(pool) == 0:
        raise ValueError("master problem needs at least one cut")
    if p <= ENUMERATION_MAX_P and _enumeration_count(p, k) <= ENUMERATION_MAX_COUNT:
        return _enumerate_master(pool, k, cutoff)

    G, a = pool.gradients, pool.intercepts
    m = G.shape[0]
    best_val = math.inf
    best = None
    if incumbent is not None:
        inc = incumbent if isinstance(incumbent, Support) else Support(tuple(incumbent))
        if len(inc) <= k:
            best_val, best = pool.model_value(inc), inc.indices
    floor = math.inf  # smallest bound among subtrees pruned by the cutoff
    stack = [(np.zeros(p, dtype=bool), np.zeros(p, dtype=bool), -math.inf)]
    nodes = 0
    complete = True
    while stack:
        if (deadline is not None and time.perf_counter() > deadline) or \
                (max_nodes is not None and nodes >= max_nodes):
            complete = False
            floor = min(floor, min(b for _, _, b in stack))
            break
        fixed_in, fixed_out, parent_bound = stack.pop()
        if parent_bound >= min(best_val, cutoff) - tol:
            if best_val >= cutoff:
                floor = min(floor, parent_bound)
            continue
        nodes += 1
        r = k - int(fixed_in.sum())
        free = np.flatnonzero(~(fixed_in | fixed_out))
        base = a + G[:, fixed_in].sum(axis=1)
        Gf = np.minimum(G[:, free], 0.0)
        if r <= 0 or free.size == 0:
            picks = np.zeros((m, 0), dtype=int)
        elif r >= free.size:
            picks = np.broadcast_to(np.arange(free.size), (m, free.size))
        else:
            picks = np.argpartition(Gf, r - 1, axis=1)[:, :r]
        gains = np.take_along_axis(Gf, picks, axis=1).sum(axis=1) if picks.size else np.zeros(m)
        cut_bounds = base + gains
        node_bound = float(cut_bounds.max())
        target = min(best_val, cutoff)
        if node_bound >= target - tol:
            if best_val >= cutoff:
                floor = min(floor, node_bound)
            continue
        # heuristic: every cut's own completion is a feasible point of this node
        in_idx = np.flatnonzero(fixed_in)
        cand_vals = np.empty(m)
        cands = []
        for i in range(m):
            chosen = free[picks[i]] if picks.size else free[:0]
            chosen = chosen[G[i, chosen] < 0]
            sel = np.concatenate([in_idx, chosen])
            cands.append(sel)
            cand_vals[i] = np.max(a + G[:, sel].sum(axis=1))
        i_best = int(np.argmin(cand_vals))
        if cand_vals[i_best] < best_val - tol:
            best_val, best = float(cand_vals[i_best]), np.sort(cands[i_best])
        if node_bound >= min(best_val, cutoff) - tol:
            if best_val >= cutoff:
                floor = min(floor, node_bound)
            continue
        # branch on a variable the binding cut picks but the cut active at
        # that completion values least
        i_star = int(np.argmax(cut_bounds))
        sel = cands[i_star]
        i_act = int(np.argmax(a + G[:, sel].sum(axis=1)))
        comp = sel[~fixed_in[sel]]
        if comp.size:
            j = int(comp[np.argmax(G[i_act, comp] - G[i_star, comp])])
        else:
            j = int(free[np.argmin(G[i_act, free])])
        out_child = fixed_out.copy()
        out_child[j] = True
        in_child = fixed_in.copy()
        in_child[j] = True
        stack.append((fixed_in, out_child, node_bound))
        stack.append((in_child, fixed_out, node_bound))
    if best_val < cutoff:
        bound = min(best_val, floor)
        support = Support(tuple(best), k)
    else:
        bound = floor if math.isfinite(floor) else cutoff
        if not complete:
            bound = min(bound, cutoff)
        support = None
    return MasterResult(support, best_val if support is not None else bound, bound, complete, nodes)


@dataclass
class CIOResult:
    support: Support
    value: float
    bound: float
    certified: bool
    iterations: int
    pool: CutPool
    log: list[dict] = field(default_factory=list)
    alpha_star: np.ndarray | None = None
    elapsed: float = 0.0


def cutting_plane_solve(data: Dataset, model: LossModel, k: int, gamma: float,
                        warm=None, epsilon: float = 1e-4, time_limit: float | None = None,
                        max_iterations: int | None = None, max_nodes: int | None = None,
                        pool: CutPool | None = None, saddle_cfg: SubgradientConfig | None = None
                        ) -> CIOResult:
    """Outer approximation for ``min c(s)`` over binary ``s`` with ``sum(s) <= k``.

    Stops with ``certified=True`` once ``best c(s) - bound <= epsilon``;
    otherwise returns the incumbent when the time limit (default 60 s for
    regression, 180 s for classification), ``max_iterations`` cuts or the
    per-master ``max_nodes`` budget is exhausted.  The warm start defaults
    to the support returned by the dual sub-gradient method.
    """
    if not 1 <= k <= data.p:
        raise ValueError("k must satisfy 1 <= k <= p")
    if time_limit is None:
        time_limit = 180.0 if model.is_classification else 60.0
    start = time.perf_counter()
    deadline = start + time_limit if math.isfinite(time_limit) else None
    if warm is None:
        from .saddle import subgradient_solve

        cfg = saddle_cfg or SubgradientConfig(gamma=gamma)
        warm = subgradient_solve(data, model, k, cfg).support
    warm = warm if isinstance(warm, Support) else Support(tuple(warm))
    if len(warm) > k:
        raise ValueError("warm start larger than k")
    pool = pool or CutPool(data.p, epsilon, time_limit)

    evaluated: dict[tuple[int, ...], InnerResult] = {}

    def evaluate(s: Support, alpha0=None) -> InnerResult:
        res = inner_value_grad(s, data, model, gamma, alpha0=alpha0)
        evaluated[s.selected] = res
        pool.add(res.value, res.grad, s)
        return res

    res = evaluate(warm)
    best_s, best_val, best_alpha = warm, res.value, res.alpha_star
    bound = -math.inf
    log = [{"iter": 0, "c": best_val, "eta": math.nan, "gap": math.inf,
            "elapsed": time.perf_counter() - start, "cuts": len(pool)}]
    it = 0
    certified = False
    while True:
        cutoff = best_val - epsilon
        master = solve_master(pool, data.p, k, incumbent=best_s, cutoff=cutoff,
                              deadline=deadline, max_nodes=max_nodes)
        if master.complete:
            bound = max(bound, master.bound)
        if best_val - bound <= epsilon:
            certified = True
            break
        if master.support is None or (master.support.selected in evaluated):
            break
        it += 1
        res = evaluate(master.support, alpha0=best_alpha)
        if res.value < best_val:
            best_s, best_val, best_alpha = master.support, res.value, res.alpha_star
        log.append({"iter": it, "c": res.value, "eta": master.eta,
                    "gap": best_val - bound, "elapsed": time.perf_counter() - start,
                    "cuts": len(pool)})
        if not master.complete:
            break
        if deadline is not None and time.perf_counter() > deadline:
            break
        if max_iterations is not None and it >= max_iterations:
            break
    elapsed = time.perf_counter() - start
    log.append({"iter": it, "c": best_val, "eta": bound, "gap": best_val - bound,
                "elapsed": elapsed, "cuts": len(pool)})
    return CIOResult(Support(best_s.selected, k), best_val, bound, certified, it, pool, log,
                     best_alpha, elapsed)


def write_log(log: list[dict], path) -> None:
    """Per-iteration rows ``iter, c, eta, gap, elapsed, cuts`` as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "c", "eta", "gap", "elapsed", "cuts"])
        for row in log:
            w.writerow([row["iter"], repr(row["c"]), repr(row["eta"]), repr(row["gap"]),
                        f"{row['elapsed']:.6f}", row["cuts"]])
