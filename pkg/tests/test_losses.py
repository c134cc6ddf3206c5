import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from sparsebench.losses import (
    DomainError,
    InvalidLabelError,
    LossKind,
    LossModel,
    conjugate_bounds,
    conjugate_domain_project,
    conjugate_eval,
    conjugate_partial,
    loss_eval,
    loss_partial,
)

KINDS = list(LossKind)
CLASSIF = {LossKind.LOGISTIC, LossKind.HINGE, LossKind.L2SVM}


def sup_oracle(model, y, a):
    """sup_u (u a - loss(y, u)) by a coarse grid followed by bounded refinement."""
    grid = np.linspace(-60, 60, 24001)
    vals = grid * a - loss_eval(model, np.full_like(grid, y), grid)
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(lambda u: -(u * a - float(loss_eval(model, y, u))),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return max(-res.fun, vals[i])


def interior_point(model, y, frac):
    lo, hi = conjugate_bounds(model, np.array([y]))
    lo, hi = max(lo[0], -3.0), min(hi[0], 3.0)
    return lo + (hi - lo) * (0.05 + 0.9 * frac)


# ------------------------------------------------------------------ examples

def test_loss_examples():
    assert loss_eval(LossModel("ols"), 1.0, 0.0) == 0.5
    assert loss_eval(LossModel("hinge"), 1.0, 1.0) == 0.0
    assert loss_eval(LossModel("logistic"), 1.0, 0.0) == pytest.approx(math.log(2), abs=1e-15)


def test_conjugate_examples():
    assert conjugate_eval(LossModel("ols"), 1.0, 1.0) == 1.5
    assert conjugate_eval(LossModel("hinge"), 1.0, -0.5) == -0.5
    # frozen from the grid-plus-refinement oracle: -H(1/2) = -ln 2
    got = conjugate_eval(LossModel("logistic"), 1.0, -0.5)
    assert got == pytest.approx(-0.6931471805599453, abs=1e-12)
    assert sup_oracle(LossModel("logistic"), 1.0, -0.5) == pytest.approx(got, abs=1e-6)


def test_projection_examples():
    assert conjugate_domain_project(LossModel("ols"), 1.0, 7.3) == 7.3
    assert conjugate_domain_project(LossModel("hinge"), 1.0, 0.7) == 0.0
    assert conjugate_domain_project(LossModel("logistic", logistic_clamp=1e-4), 1.0, -1.5) \
        == pytest.approx(-1 + 1e-4, abs=1e-15)


def test_partial_examples():
    assert conjugate_partial(LossModel("ols"), 1.0, 2.0) == 3.0
    assert conjugate_partial(LossModel("hinge"), 1.0, -0.5) == 1.0
    # frozen from a central difference of conjugate_eval at step 1e-6
    got = conjugate_partial(LossModel("logistic"), 1.0, -0.25)
    assert got == pytest.approx(math.log(3), rel=1e-12)
    m, h = LossModel("logistic"), 1e-6
    fd = (conjugate_eval(m, 1.0, -0.25 + h) - conjugate_eval(m, 1.0, -0.25 - h)) / (2 * h)
    assert fd == pytest.approx(got, rel=1e-7)


def test_out_of_domain_is_inf():
    assert conjugate_eval(LossModel("hinge"), 1.0, 0.5) == math.inf
    assert conjugate_eval(LossModel("logistic"), -1.0, -0.2) == math.inf
    assert conjugate_eval(LossModel("l1svr"), 0.3, 1.5) == math.inf
    assert conjugate_eval(LossModel("l2svm"), 1.0, 0.1) == math.inf


def test_label_validation():
    for kind in CLASSIF:
        with pytest.raises(InvalidLabelError):
            loss_eval(LossModel(kind), 0.5, 0.0)
    # regression losses accept +-1 labels
    assert loss_eval(LossModel("ols"), -1.0, 1.0) == 2.0


def test_partial_rejects_boundary():
    with pytest.raises(DomainError):
        conjugate_partial(LossModel("hinge"), 1.0, 0.0)
    with pytest.raises(DomainError):
        conjugate_partial(LossModel("logistic"), 1.0, -1.0)
    with pytest.raises(DomainError):
        conjugate_partial(LossModel("l1svr"), 0.2, 0.0)


def test_hinge_kink_convention():
    assert loss_partial(LossModel("hinge"), 1.0, 1.0) == 0.0
    assert loss_partial(LossModel("hinge"), 1.0, 0.5) == -1.0


def test_model_validation():
    with pytest.raises(ValueError):
        LossModel("ols", svr_epsilon=-1)
    with pytest.raises(ValueError):
        LossModel("logistic", logistic_clamp=0.0)
    with pytest.raises(ValueError):
        LossModel("poisson")


# ---------------------------------------------------------------- properties

@pytest.mark.parametrize("kind", KINDS)
def test_fenchel_young_bulk(kind):
    """10^4 random triples per kind, violation tolerance 1e-10."""
    rng = np.random.default_rng(int(hash(kind.value)) % 2**32)
    model = LossModel(kind)
    N = 10_000
    y = rng.choice([-1.0, 1.0], N) if kind in CLASSIF else rng.normal(0, 2, N)
    u = rng.normal(0, 3, N)
    lo, hi = conjugate_bounds(model, y)
    lo, hi = np.maximum(lo, -5.0), np.minimum(hi, 5.0)
    a = lo + (hi - lo) * rng.uniform(0.0, 1.0, N)
    if kind is LossKind.LOGISTIC:
        a = conjugate_domain_project(model, y, a)
    gap = loss_eval(model, y, u) + conjugate_eval(model, y, a) - u * a
    assert gap.min() >= -1e-10


@pytest.mark.parametrize("kind", KINDS)
def test_fenchel_young_equality_at_maximiser(kind):
    model = LossModel(kind)
    rng = np.random.default_rng(7)
    for _ in range(20):
        y = float(rng.choice([-1.0, 1.0])) if kind in CLASSIF else float(rng.normal())
        u = float(rng.normal())
        g = float(loss_partial(model, y, u))   # a subgradient attains equality
        total = loss_eval(model, y, u) + conjugate_eval(model, y, g) - u * g
        assert abs(total) <= 1e-10


@pytest.mark.parametrize("kind", KINDS)
def test_conjugate_matches_sup_oracle(kind):
    model = LossModel(kind)
    rng = np.random.default_rng(11)
    for _ in range(12):
        y = float(rng.choice([-1.0, 1.0])) if kind in CLASSIF else float(rng.normal())
        a = interior_point(model, y, rng.uniform())
        if kind is LossKind.LOGISTIC:
            a = float(conjugate_domain_project(model, y, a))
        assert conjugate_eval(model, y, a) == pytest.approx(sup_oracle(model, y, a), abs=1e-6)


@pytest.mark.parametrize("kind", KINDS)
def test_partial_matches_finite_difference(kind):
    model = LossModel(kind)
    rng = np.random.default_rng(5)
    h = 1e-6
    checked = 0
    while checked < 25:
        y = float(rng.choice([-1.0, 1.0])) if kind in CLASSIF else float(rng.normal())
        a = interior_point(model, y, rng.uniform())
        if abs(a) < 1e-3:   # keep clear of the SVR kink at zero
            continue
        fd = (conjugate_eval(model, y, a + h) - conjugate_eval(model, y, a - h)) / (2 * h)
        got = conjugate_partial(model, y, a)
        assert abs(got - fd) <= 1e-5 * max(1.0, abs(fd))
        checked += 1


@pytest.mark.parametrize("kind", KINDS)
@settings(max_examples=60, deadline=None)
@given(y=st.floats(-3, 3), u1=st.floats(-10, 10), u2=st.floats(-10, 10), t=st.floats(0, 1))
def test_loss_midpoint_convexity(kind, y, u1, u2, t):
    if kind in CLASSIF:
        y = 1.0 if y >= 0 else -1.0
    model = LossModel(kind)
    mid = loss_eval(model, y, t * u1 + (1 - t) * u2)
    assert mid <= t * loss_eval(model, y, u1) + (1 - t) * loss_eval(model, y, u2) + 1e-9


@pytest.mark.parametrize("kind", KINDS)
@settings(max_examples=60, deadline=None)
@given(y=st.floats(-3, 3), a=st.floats(-5, 5))
def test_projection_idempotent_and_finite(kind, y, a):
    if kind in CLASSIF:
        y = 1.0 if y >= 0 else -1.0
    model = LossModel(kind)
    once = conjugate_domain_project(model, y, a)
    assert conjugate_domain_project(model, y, once) == once
    assert math.isfinite(conjugate_eval(model, y, once))


def test_vectorised_shapes():
    model = LossModel("ols")
    y = np.arange(4.0)
    assert conjugate_eval(model, y, -y).shape == (4,)
    assert np.ndim(conjugate_eval(model, 1.0, 1.0)) == 0
