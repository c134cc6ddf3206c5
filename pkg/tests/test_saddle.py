import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_c, enumerate_best, gaussian_instance
from sparsebench.datagen import Dataset
from sparsebench.losses import DomainError, LossModel
from sparsebench.saddle import (
    SaddleState,
    Support,
    SubgradientConfig,
    adaptive_step,
    dual_function,
    partial_min_support,
    penalized_margins,
    penalized_solve,
    subgradient_solve,
    top_k,
    write_trace,
)

OLS = LossModel("ols")


def test_support_invariants():
    s = Support((3, 1, 2), 3)
    assert s.selected == (1, 2, 3)
    with pytest.raises(ValueError):
        Support((1, 1))
    with pytest.raises(ValueError):
        Support((1, 2, 3), 2)
    assert Support.from_mask([0, 1, 1]).selected == (1, 2)
    assert list(s.mask(5)) == [False, True, True, True, False]


def test_dual_function_examples():
    rng = np.random.default_rng(0)
    data = Dataset(rng.normal(size=(3, 2)), rng.normal(size=3))
    assert dual_function(np.zeros(3), (0, 1), data, OLS, 2.0) == 0.0
    a = rng.normal(size=3)
    assert dual_function(a, (), data, OLS, 2.0) == pytest.approx(-np.sum(0.5 * a * a + data.y * a),
                                                                 abs=1e-12)
    # independent dense evaluation with diag(s)
    s = np.array([1.0, 1.0])
    direct = -np.sum(0.5 * a * a + data.y * a) - 1.0 * a @ data.X @ np.diag(s) @ data.X.T @ a
    assert dual_function(a, (0, 1), data, OLS, 2.0) == pytest.approx(direct, abs=1e-12)


def test_dual_function_rejects_out_of_domain():
    data = Dataset(np.eye(2), np.array([1.0, -1.0]))
    with pytest.raises(DomainError):
        dual_function(np.array([0.5, 0.0]), (0,), data, LossModel("hinge"), 1.0)


def test_partial_min_examples():
    data = Dataset(np.eye(3), np.zeros(3))
    assert partial_min_support(np.array([1.0, 2.0, 0.0]), data, 1.0, 1).selected == (1,)
    assert partial_min_support(np.zeros(3), data, 1.0, 2).selected == (0, 1)
    with pytest.raises(ValueError):
        partial_min_support(np.zeros(3), data, 1.0, 4)


def test_partial_min_matches_brute_force():
    rng = np.random.default_rng(3)
    data = Dataset(rng.normal(size=(5, 8)), rng.normal(size=5))
    for _ in range(10):
        a = rng.normal(size=5)
        got = partial_min_support(a, data, 0.7, 3)
        vals = {c: dual_function(a, c, data, OLS, 0.7) for c in itertools.combinations(range(8), 3)}
        best = min(vals.values())
        assert vals[got.selected] == pytest.approx(best, abs=1e-12)


def test_top_k_ties():
    assert list(top_k(np.array([1.0, 3.0, 3.0, 3.0]), 2)) == [1, 2]


def test_adaptive_step_examples():
    st_ = SaddleState(np.zeros(1), np.zeros(1), best_upper=1.0, best_lower=0.0)
    assert adaptive_step(st_, 4.0) == 0.25
    st_.best_lower = 1.0
    assert adaptive_step(st_, 4.0) == 0.0
    assert adaptive_step(st_, 0.0) == 0.0
    st_.best_lower, st_.best_upper = 0.0, 1e-20
    assert adaptive_step(st_, 1.0) == 1e-12


def test_adaptive_step_matches_trace():
    data = gaussian_instance(30, 10, 3, seed=4, covariance="identity")
    res = subgradient_solve(data, OLS, 3, SubgradientConfig(gamma=0.5, t_max=30, gap_tol=0))
    for row in res.trace:
        if row["grad_norm_sq"] > 0 and row["best_upper"] > row["best_lower"]:
            expect = (row["best_upper"] - row["best_lower"]) / row["grad_norm_sq"]
            assert row["delta"] == pytest.approx(max(expect, 1e-12), rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_weak_duality_along_trace(seed):
    data = gaussian_instance(25, 10, 3, seed=seed, covariance="identity")
    res = subgradient_solve(data, OLS, 3, SubgradientConfig(gamma=1.0, t_max=60, gap_tol=0))
    for row in res.trace:
        assert row["f"] <= row["c"] + 1e-9
        assert row["best_lower"] <= row["best_upper"] + 1e-9
    lows = [r["best_lower"] for r in res.trace]
    assert all(b >= a for a, b in zip(lows, lows[1:]))


def test_weak_duality_hinge():
    data = gaussian_instance(40, 8, 3, seed=1, task="classification", covariance="identity")
    res = subgradient_solve(data, LossModel("hinge"), 3,
                            SubgradientConfig(gamma=0.5, t_max=40, track_best_primal=True))
    for row in res.trace:
        assert row["f"] <= row["c"] + 1e-7


@pytest.mark.parametrize("gamma, t_max", [(10.0, 200), (100.0, 2000)])
def test_enumeration_agreement_large_gamma(gamma, t_max):
    # at gamma=100 the adaptive step needs more than the default 200 iterations
    hits = 0
    for seed in range(10):
        data = gaussian_instance(20, 8, 3, seed=seed, covariance="identity", snr=10)
        res = subgradient_solve(data, OLS, 3, SubgradientConfig(gamma=gamma, t_max=t_max))
        opt, _ = enumerate_best(data.X, data.y, 3, gamma)
        got = dense_c(data.X, data.y, res.support.mask(8), gamma)
        hits += abs(got - opt) <= 1e-6 * max(1.0, abs(opt))
    assert hits >= 9


def test_k_equals_p_is_ridge():
    data = gaussian_instance(15, 5, 2, seed=0)
    res = subgradient_solve(data, OLS, 5, SubgradientConfig(gamma=0.3))
    assert res.support.selected == tuple(range(5))
    ridge = 0.5 * data.y @ np.linalg.solve(np.eye(15) + 0.3 * data.X @ data.X.T, data.y)
    assert res.upper == pytest.approx(ridge, rel=1e-10)


def test_zero_response_fixed_point():
    data = Dataset(np.random.default_rng(0).normal(size=(10, 4)), np.zeros(10))
    res = subgradient_solve(data, OLS, 2)
    assert not res.alpha_avg.any()
    assert res.upper == 0.0


def test_support_size_and_determinism():
    data = gaussian_instance(30, 12, 4, seed=8, rho=0.5)
    a = subgradient_solve(data, OLS, 4, SubgradientConfig(gamma=2.0))
    b = subgradient_solve(data, OLS, 4, SubgradientConfig(gamma=2.0))
    assert len(a.support) == 4
    assert a.support == b.support and np.array_equal(a.alpha_avg, b.alpha_avg)
    assert a.trace == b.trace
    assert len(subgradient_solve(data, OLS, 20).support) == 12


def test_constant_step_and_untracked():
    data = gaussian_instance(30, 10, 3, seed=2, covariance="identity")
    cfg = SubgradientConfig(gamma=1.0, step_rule="constant", delta=0.05, t_max=100,
                            track_best_primal=False)
    res = subgradient_solve(data, OLS, 3, cfg)
    # untracked: support recovered from the averaged dual
    assert res.support == partial_min_support(res.alpha_avg, data, 1.0, 3)
    assert res.iterations == 100
    with pytest.raises(ValueError):
        SubgradientConfig(step_rule="constant", delta=0.0)
    with pytest.raises(ValueError):
        SubgradientConfig(gamma=0.0)


def test_lower_bound_improves_with_iterations_on_average():
    early, late = [], []
    for seed in range(5):
        data = gaussian_instance(30, 10, 3, seed=seed, covariance="identity")
        for T, bucket in ((5, early), (80, late)):
            cfg = SubgradientConfig(gamma=1.0, step_rule="constant", delta=0.02, t_max=T, gap_tol=0)
            bucket.append(subgradient_solve(data, OLS, 3, cfg).lower)
    assert np.mean(late) >= np.mean(early)


def test_penalized_extremes():
    data = gaussian_instance(20, 6, 2, seed=5)
    assert len(penalized_solve(data, OLS, 0.0, SubgradientConfig(gamma=1.0)).support) == 6
    assert len(penalized_solve(data, OLS, 1e9, SubgradientConfig(gamma=1.0)).support) == 0
    with pytest.raises(ValueError):
        penalized_solve(data, OLS, -1.0)


def test_penalized_margins():
    data = Dataset(np.eye(2), np.zeros(2))
    m = penalized_margins(np.array([1.0, 2.0]), data, 2.0, 1.5)
    assert list(m) == [0.5, -2.5]


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**5), k=st.integers(1, 6))
def test_support_binary_exact_k(seed, k):
    data = gaussian_instance(15, 6, 2, seed=seed)
    res = subgradient_solve(data, OLS, k, SubgradientConfig(gamma=0.5, t_max=20))
    assert len(res.support) == k
    assert math.isfinite(res.gap) and res.gap >= -1e-12


def test_write_trace(tmp_path):
    data = gaussian_instance(15, 5, 2, seed=0)
    res = subgradient_solve(data, OLS, 2, SubgradientConfig(t_max=5, gap_tol=0))
    path = tmp_path / "trace.csv"
    write_trace(res.trace, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,f,c,delta,gap" and len(lines) == 1 + len(res.trace)
