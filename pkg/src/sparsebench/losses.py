"""Loss functions, their Fenchel conjugates and conjugate-domain helpers.

Every function here is a vectorised map over ``(y, u)`` or ``(y, alpha)``
arrays; scalars go in and come out as NumPy scalars.  The conjugate is
``conj(y, a) = sup_u {u * a - loss(y, u)}`` and is ``+inf`` outside its
domain.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import entr, expit


class LossKind(str, Enum):
    OLS = "ols"
    LOGISTIC = "logistic"
    HINGE = "hinge"
    L2SVM = "l2svm"
    L1SVR = "l1svr"
    L2SVR = "l2svr"


CLASSIFICATION_KINDS = frozenset({LossKind.LOGISTIC, LossKind.HINGE, LossKind.L2SVM})


class InvalidLabelError(ValueError):
    """Labels outside the admissible set of a loss."""


class DomainError(ValueError):
    """Dual variable on the boundary of, or outside, the conjugate domain."""


@dataclass(frozen=True)
class LossModel:
    """A loss together with the parameters its conjugate needs.

    Parameters
    ----------
    kind : LossKind or str
        One of ``ols, logistic, hinge, l2svm, l1svr, l2svr``.
    svr_epsilon : float
        Insensitivity width of the SVR losses.
    logistic_clamp : float
        Interior margin used when projecting onto the (open) logistic
        conjugate domain.
    """

    kind: LossKind = LossKind.OLS
    svr_epsilon: float = 0.1
    logistic_clamp: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        if self.svr_epsilon < 0:
            raise ValueError("svr_epsilon must be nonnegative")
        if not 0 < self.logistic_clamp < 0.5:
            raise ValueError("logistic_clamp must lie in (0, 1/2)")

    @property
    def is_classification(self) -> bool:
        return self.kind in CLASSIFICATION_KINDS

    @property
    def name(self) -> str:
        return self.kind.value


def validate_labels(model: LossModel, y) -> np.ndarray:
    """Return ``y`` as a float array, raising if it is not admissible."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise InvalidLabelError("labels must be finite")
    if model.is_classification and not np.all(np.abs(y) == 1.0):
        raise InvalidLabelError(f"{model.name} loss requires labels in {{-1, +1}}")
    return y


def loss_eval(model: LossModel, y, u):
    """Evaluate ``loss(y, u)``."""
    y = validate_labels(model, y)
    u = np.asarray(u, dtype=float)
    kind, eps = model.kind, model.svr_epsilon
    if kind is LossKind.OLS:
        return 0.5 * (y - u) ** 2
    if kind is LossKind.LOGISTIC:
        return np.logaddexp(0.0, -y * u)
    if kind is LossKind.HINGE:
        return np.maximum(0.0, 1.0 - y * u)
    if kind is LossKind.L2SVM:
        return 0.5 * np.maximum(0.0, 1.0 - y * u) ** 2
    if kind is LossKind.L1SVR:
        return np.maximum(np.abs(y - u) - eps, 0.0)
    return 0.5 * np.maximum(np.abs(y - u) - eps, 0.0) ** 2


def loss_partial(model: LossModel, y, u):
    """Derivative of the loss in ``u``.

    At kinks the zero sub-gradient is returned (hinge at ``y * u = 1``,
    L1-SVR at ``|y - u| = eps``).
    """
    y = validate_labels(model, y)
    u = np.asarray(u, dtype=float)
    kind, eps = model.kind, model.svr_epsilon
    if kind is LossKind.OLS:
        return u - y
    if kind is LossKind.LOGISTIC:
        return -y * expit(-y * u)
    if kind is LossKind.HINGE:
        return np.where(y * u < 1.0, -y, 0.0)
    if kind is LossKind.L2SVM:
        return -y * np.maximum(0.0, 1.0 - y * u)
    r = u - y
    if kind is LossKind.L1SVR:
        return np.where(np.abs(r) > eps, np.sign(r), 0.0)
    return np.sign(r) * np.maximum(np.abs(r) - eps, 0.0)


def conjugate_bounds(model: LossModel, y):
    """Closed hull ``(lo, hi)`` of the conjugate domain for each label."""
    y = np.asarray(y, dtype=float)
    kind = model.kind
    inf = np.full_like(y, np.inf)
    if kind in (LossKind.OLS, LossKind.L2SVR):
        return -inf, inf
    if kind is LossKind.L1SVR:
        return -np.ones_like(y), np.ones_like(y)
    if kind is LossKind.L2SVM:
        return np.where(y > 0, -np.inf, 0.0), np.where(y > 0, 0.0, np.inf)
    # logistic and hinge: y * a in [-1, 0]
    return np.minimum(-y, 0.0), np.maximum(-y, 0.0)


def conjugate_eval(model: LossModel, y, alpha):
    """Fenchel conjugate ``conj(y, alpha)``; ``+inf`` outside the domain."""
    y = np.asarray(y, dtype=float)
    a = np.asarray(alpha, dtype=float)
    y, a = np.broadcast_arrays(y, a)
    kind, eps = model.kind, model.svr_epsilon
    lo, hi = conjugate_bounds(model, y)
    inside = (a >= lo) & (a <= hi)
    with np.errstate(invalid="ignore"):
        if kind is LossKind.LOGISTIC:
            x = np.clip(-y * a, 0.0, 1.0)
            val = -(entr(x) + entr(1.0 - x))
        elif kind is LossKind.HINGE:
            val = y * a
        elif kind in (LossKind.OLS, LossKind.L2SVM):
            val = 0.5 * a * a + y * a
        elif kind is LossKind.L1SVR:
            val = y * a + eps * np.abs(a)
        else:
            val = 0.5 * a * a + y * a + eps * np.abs(a)
    out = np.where(inside, val, np.inf)
    return out[()] if out.ndim == 0 else out


def conjugate_domain_project(model: LossModel, y, alpha):
    """Nearest point of the (interiorised, for logistic) conjugate domain."""
    y = np.asarray(y, dtype=float)
    a = np.asarray(alpha, dtype=float)
    if model.kind is LossKind.LOGISTIC:
        tau = model.logistic_clamp
        out = y * np.clip(y * a, -1.0 + tau, -tau)
    else:
        lo, hi = conjugate_bounds(model, y)
        out = np.clip(a, lo, hi)
    return out[()] if np.ndim(out) == 0 else out


def _conjugate_grad(model: LossModel, y, a):
    # no domain check: callers keep alpha inside the projected domain
    kind, eps = model.kind, model.svr_epsilon
    if kind is LossKind.OLS or kind is LossKind.L2SVM:
        return a + y
    if kind is LossKind.HINGE:
        return y * np.ones_like(a)
    if kind is LossKind.LOGISTIC:
        ya = y * a
        return y * (np.log1p(ya) - np.log(-ya))
    if kind is LossKind.L1SVR:
        return y + eps * np.sign(a)
    return a + y + eps * np.sign(a)


def conjugate_partial(model: LossModel, y, alpha):
    """Derivative of the conjugate in ``alpha`` at interior points.

    Raises
    ------
    DomainError
        If ``alpha`` is on the boundary of, or outside, the domain.  For the
        SVR kinds ``alpha = 0`` is also rejected (kink of ``eps * |alpha|``).
    """
    y = np.asarray(y, dtype=float)
    a = np.asarray(alpha, dtype=float)
    y, a = np.broadcast_arrays(y, a)
    lo, hi = conjugate_bounds(model, y)
    bad = ~((a > lo) & (a < hi))
    if model.kind in (LossKind.L1SVR, LossKind.L2SVR) and model.svr_epsilon > 0:
        bad |= a == 0
    if np.any(bad):
        raise DomainError(f"alpha not strictly inside the {model.name} conjugate domain")
    out = _conjugate_grad(model, y, a)
    return out[()] if out.ndim == 0 else out


def initial_dual(model: LossModel, y, scale: float = 1.0) -> np.ndarray:
    """Starting dual point: ``-y / scale`` for regression, domain centre otherwise."""
    y = np.asarray(y, dtype=float)
    if model.is_classification:
        return -0.5 * y
    if model.kind is LossKind.L1SVR:
        return np.clip(-y / scale, -1.0, 1.0)
    return -y / scale
