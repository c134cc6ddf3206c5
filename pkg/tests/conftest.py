import itertools

import numpy as np
import pytest

from sparsebench.datagen import Dataset, SyntheticSpec, sample_dataset


def dense_c(X, y, s, gamma):
    """Oracle for the OLS primal value: 1/2 y'(I + gamma X diag(s) X')^{-1} y, dense inverse."""
    s = np.asarray(s, dtype=float)
    K = np.eye(X.shape[0]) + gamma * (X * s) @ X.T
    return 0.5 * y @ np.linalg.inv(K) @ y


def enumerate_best(X, y, k, gamma, exact_size=True):
    """Exhaustive minimum of the OLS primal value over supports of size k (or <= k)."""
    p = X.shape[1]
    sizes = [k] if exact_size else range(k + 1)
    best = (np.inf, None)
    for size in sizes:
        for c in itertools.combinations(range(p), size):
            s = np.zeros(p)
            s[list(c)] = 1
            v = dense_c(X, y, s, gamma)
            if v < best[0]:
                best = (v, c)
    return best


@pytest.fixture
def small_ols():
    return sample_dataset(SyntheticSpec(n=30, p=8, k_true=3, covariance="identity", snr=4, seed=3))


def gaussian_instance(n, p, k_true, seed, **kw):
    return sample_dataset(SyntheticSpec(n=n, p=p, k_true=k_true, seed=seed, **kw))


def centred(data: Dataset) -> Dataset:
    return Dataset(data.X - data.X.mean(axis=0), data.y - data.y.mean(), data.w_true)


# ------------------------------------------------------------ acceptance log

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
