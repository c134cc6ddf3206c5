import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsebench.datagen import (
    Covariance,
    Dataset,
    IngestError,
    MissingValueError,
    SyntheticSpec,
    Task,
    WeightScheme,
    build_covariance,
    hard_mi_theta,
    ingest_matrix,
    pve,
    sample_dataset,
    sample_splits,
    split_dataset,
    standardize,
    write_dataset,
)


def test_toeplitz_entries():
    sigma = build_covariance(SyntheticSpec(n=5, p=4, k_true=1, rho=0.5))
    assert sigma[0, 3] == 0.125
    assert sigma[2, 1] == 0.5
    assert np.all(np.diag(sigma) == 1.0)


def test_hard_mi_structure():
    k = 10
    sigma = build_covariance(SyntheticSpec(n=5, p=20, k_true=k, covariance="hardmi"))
    theta = hard_mi_theta(k)
    assert theta == pytest.approx(1 / 20 + 1 / (2 * math.sqrt(10)), abs=1e-15)
    assert np.all(sigma[k, :k] == theta) and np.all(sigma[:k, k] == theta)
    # the mutual-incoherence quantity |Sigma_{k+1,S} Sigma_SS^{-1}|_1 = k theta exceeds one
    assert k * theta > 1
    assert np.all(np.linalg.eigvalsh(sigma) > 0)
    off = sigma - np.eye(20)
    off[k, :k] = off[:k, k] = 0
    assert not off.any()


def test_hard_mi_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(n=5, p=10, k_true=10, covariance="hardmi")
    with pytest.raises(ValueError):
        SyntheticSpec(n=5, p=10, k_true=1, covariance="hardmi")
    with pytest.raises(ValueError):
        SyntheticSpec(n=5, p=10, k_true=2, rho=1.0)


@pytest.mark.parametrize("snr", [0.05, 1.0, 6.0])
def test_pve_identity(snr):
    data = sample_dataset(SyntheticSpec(n=200, p=30, k_true=5, rho=0.3, snr=snr, seed=9))
    assert abs(pve(data) - snr / (1 + snr)) <= 1e-12


def test_signed_weights():
    data = sample_dataset(SyntheticSpec(n=10, p=50, k_true=7, seed=1))
    nz = data.w_true[data.w_true != 0]
    assert nz.size == 7 and set(np.abs(nz)) == {1.0}


def test_uniform_weights():
    data = sample_dataset(SyntheticSpec(n=10, p=20, k_true=4, covariance="hardmi",
                                        weight_scheme="uniform_over_root"))
    assert np.allclose(data.w_true[:4], 0.5) and not data.w_true[4:].any()


def test_empirical_covariance():
    spec = SyntheticSpec(n=40_000, p=6, k_true=2, rho=0.6, seed=4)
    X = sample_dataset(spec).X
    assert np.abs(np.cov(X.T) - build_covariance(spec)).max() < 0.03


def test_classification_labels():
    data = sample_dataset(SyntheticSpec(n=100, p=10, k_true=3, task=Task.CLASSIFICATION))
    assert set(np.unique(data.y)) <= {-1.0, 1.0}


def test_determinism():
    spec = SyntheticSpec(n=25, p=12, k_true=3, rho=0.4, seed=17)
    a, b = sample_dataset(spec), sample_dataset(spec)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    c = sample_dataset(spec.with_(seed=18))
    assert not np.array_equal(a.X, c.X)


def test_splits_share_truth_and_are_independent():
    spec = SyntheticSpec(n=30, p=8, k_true=2, seed=2)
    train, valid, test = sample_splits(spec)
    assert (train.n, valid.n, test.n) == (30, 15, 30)
    assert np.array_equal(train.w_true, valid.w_true)
    assert np.array_equal(train.X, sample_dataset(spec).X)
    assert not np.array_equal(train.X[:15], valid.X)
    for part in (valid, test):
        assert abs(pve(part) - 6 / 7) < 1e-12
    _, v2, t2 = sample_splits(spec, n_valid=4, n_test=7)
    assert (v2.n, t2.n) == (4, 7)


def test_split_dataset_partitions_rows():
    data = Dataset(np.arange(200.0).reshape(100, 2), np.arange(100.0))
    tr, va, te = split_dataset(data, seed=3)
    assert (te.n, va.n, tr.n) == (15, 28, 57)
    rows = np.concatenate([tr.y, va.y, te.y])
    assert np.array_equal(np.sort(rows), np.arange(100.0))


def test_standardize():
    rng = np.random.default_rng(0)
    X = rng.normal(3, 5, (50, 4))
    X[:, 2] = 1.0
    s = standardize(Dataset(X, rng.normal(size=50)))
    assert np.allclose(s.X.mean(axis=0), 0)
    assert np.allclose(np.mean(s.X[:, [0, 1, 3]] ** 2, axis=0), 1)
    assert s.standardized and not s.X[:, 2].any()


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 40), p=st.integers(2, 15), rho=st.floats(0, 0.95), seed=st.integers(0, 10**6))
def test_shapes_and_support_size(n, p, rho, seed):
    k = max(1, p // 3)
    data = sample_dataset(SyntheticSpec(n=n, p=p, k_true=k, rho=rho, seed=seed))
    assert data.X.shape == (n, p) and data.y.shape == (n,)
    assert data.true_support.size == k


# ------------------------------------------------------------------ ingestion

def test_roundtrip(tmp_path):
    data = sample_dataset(SyntheticSpec(n=6, p=3, k_true=1, seed=5))
    path = tmp_path / "d.csv"
    write_dataset(data, path)
    back = ingest_matrix(path, "y")
    assert np.array_equal(back.X, data.X) and np.array_equal(back.y, data.y)
    assert back.feature_names == ["x1", "x2", "x3"]
    by_index = ingest_matrix(path, -1)
    assert np.array_equal(by_index.y, data.y)


def test_headerless_and_standardised(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("1,2,10\n3,4,20\n5,9,30\n")
    d = ingest_matrix(path, 0, standardize_columns=True)
    assert np.array_equal(d.y, [1.0, 3.0, 5.0])
    assert d.standardized and np.allclose(d.X.mean(axis=0), 0)


@pytest.mark.parametrize("body, exc", [
    ("a,b,y\n1,,2\n", MissingValueError),
    ("a,b,y\n1,NaN,2\n", MissingValueError),
    ("a,b,y\n1,x,2\n", IngestError),
    ("a,b,y\n1,2\n", IngestError),
    ("", IngestError),
    ("a,b,y\n", IngestError),
])
def test_ingest_errors(tmp_path, body, exc):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(exc):
        ingest_matrix(path, "y")


def test_unknown_response(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(IngestError):
        ingest_matrix(path, "y")
    with pytest.raises(IngestError):
        ingest_matrix(path, 5)


def test_enum_coercion():
    spec = SyntheticSpec(n=3, p=3, k_true=1, covariance="identity", weight_scheme="signed_unit")
    assert spec.covariance is Covariance.IDENTITY and spec.weight_scheme is WeightScheme.SIGNED_UNIT
