"""Synthetic design generation and ingestion of external design matrices."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np


class Covariance(str, Enum):
    TOEPLITZ = "toeplitz"
    HARD_MI = "hardmi"
    IDENTITY = "identity"


class Task(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


class WeightScheme(str, Enum):
    SIGNED_UNIT = "signed_unit"
    UNIFORM_OVER_ROOT = "uniform_over_root"


class IngestError(ValueError):
    """Malformed input table."""


class MissingValueError(IngestError):
    """A cell of the input table is empty or NaN."""


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    p: int
    k_true: int
    covariance: Covariance = Covariance.TOEPLITZ
    rho: float = 0.0
    snr: float = 6.0
    task: Task = Task.REGRESSION
    weight_scheme: WeightScheme = WeightScheme.SIGNED_UNIT
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "covariance", Covariance(self.covariance))
        object.__setattr__(self, "task", Task(self.task))
        object.__setattr__(self, "weight_scheme", WeightScheme(self.weight_scheme))
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        if not 1 <= self.k_true <= self.p:
            raise ValueError("k_true must satisfy 1 <= k_true <= p")
        if self.snr <= 0:
            raise ValueError("snr must be positive")
        if self.covariance is Covariance.TOEPLITZ and not 0.0 <= self.rho < 1.0:
            raise ValueError("Toeplitz correlation rho must lie in [0, 1)")
        if self.covariance is Covariance.HARD_MI:
            if self.k_true < 2:
                raise ValueError("hard mutual-incoherence design needs k_true >= 2")
            if self.k_true + 1 > self.p:
                raise ValueError("hard mutual-incoherence design needs k_true + 1 <= p")

    def with_(self, **kwargs) -> "SyntheticSpec":
        return replace(self, **kwargs)


@dataclass
class Dataset:
    """Design matrix ``X`` (n x p), response ``y`` and optional ground truth."""

    X: np.ndarray
    y: np.ndarray
    w_true: np.ndarray | None = None
    standardized: bool = False
    feature_names: list[str] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ValueError("X must be n x p and y of length n")
        if self.w_true is not None:
            self.w_true = np.asarray(self.w_true, dtype=float)
            if self.w_true.shape != (self.X.shape[1],):
                raise ValueError("w_true must have length p")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def true_support(self) -> np.ndarray:
        if self.w_true is None:
            raise ValueError("dataset has no ground truth")
        return np.flatnonzero(self.w_true)

    def subset(self, rows) -> "Dataset":
        return Dataset(self.X[rows], self.y[rows], self.w_true, self.standardized,
                       self.feature_names)


def hard_mi_theta(k_true: int) -> float:
    """Off-diagonal weight of the mutual-incoherence-violating design."""
    return 1.0 / (2 * k_true) + 1.0 / (2 * math.sqrt(k_true))


def build_covariance(spec: SyntheticSpec) -> np.ndarray:
    p = spec.p
    if spec.covariance is Covariance.IDENTITY:
        return np.eye(p)
    if spec.covariance is Covariance.TOEPLITZ:
        idx = np.arange(p)
        return spec.rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)
    k = spec.k_true
    sigma = np.eye(p)
    theta = hard_mi_theta(k)
    sigma[k, :k] = theta
    sigma[:k, k] = theta
    return sigma


def _true_weights(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    w = np.zeros(spec.p)
    if spec.weight_scheme is WeightScheme.UNIFORM_OVER_ROOT:
        w[: spec.k_true] = 1.0 / math.sqrt(spec.k_true)
    else:
        pos = np.sort(rng.choice(spec.p, size=spec.k_true, replace=False))
        w[pos] = rng.choice([-1.0, 1.0], size=spec.k_true)
    return w


def _gaussian_design(spec: SyntheticSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((n, spec.p))
    if spec.covariance is Covariance.IDENTITY or (
            spec.covariance is Covariance.TOEPLITZ and spec.rho == 0.0):
        return z
    chol = np.linalg.cholesky(build_covariance(spec))
    return z @ chol.T


def _response(spec: SyntheticSpec, X: np.ndarray, w: np.ndarray,
              rng: np.random.Generator) -> np.ndarray:
    signal = X @ w
    noise = rng.standard_normal(X.shape[0])
    # rescale per realisation so that ||Xw|| / ||eps|| = sqrt(snr) exactly
    noise *= np.linalg.norm(signal) / (math.sqrt(spec.snr) * np.linalg.norm(noise))
    y = signal + noise
    if spec.task is Task.CLASSIFICATION:
        y = np.where(y >= 0, 1.0, -1.0)
    return y


def sample_dataset(spec: SyntheticSpec, n: int | None = None) -> Dataset:
    """Draw one synthetic instance; deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    w = _true_weights(spec, rng)
    X = _gaussian_design(spec, spec.n if n is None else n, rng)
    return Dataset(X, _response(spec, X, w, rng), w_true=w)


def sample_splits(spec: SyntheticSpec, n_valid: int | None = None, n_test: int | None = None):
    """Train / validation / test triple sharing the same ground truth.

    The training set is :func:`sample_dataset` (``spec.n`` rows).  Validation
    (``spec.n // 2`` rows by default, a 2:1 train:validation ratio) and test
    (``spec.n`` rows by default) are independent draws, each with its own
    exact noise rescaling.
    """
    train = sample_dataset(spec)
    sizes = (max(1, spec.n // 2) if n_valid is None else n_valid,
             spec.n if n_test is None else n_test)
    out = [train]
    for stream, size in enumerate(sizes, start=1):
        rng = np.random.default_rng([spec.seed, stream])
        X = _gaussian_design(spec, size, rng)
        out.append(Dataset(X, _response(spec, X, train.w_true, rng), w_true=train.w_true))
    return tuple(out)


def split_dataset(data: Dataset, test_fraction: float = 0.15, valid_fraction: float = 1.0 / 3.0,
                  seed: int = 0):
    """Random train / validation / test split of a single dataset.

    The outer split holds out ``test_fraction`` of the rows; the remainder is
    split ``train : validation = (1 - valid_fraction) : valid_fraction``.
    """
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n)
    n_test = int(round(test_fraction * data.n))
    test, rest = perm[:n_test], perm[n_test:]
    n_valid = int(round(valid_fraction * rest.size))
    valid, train = rest[:n_valid], rest[n_valid:]
    return data.subset(np.sort(train)), data.subset(np.sort(valid)), data.subset(np.sort(test))


def standardize(data: Dataset) -> Dataset:
    """Centre every column and scale it to unit (population) variance."""
    X = data.X - data.X.mean(axis=0)
    scale = np.sqrt(np.mean(X * X, axis=0))
    scale[scale == 0] = 1.0
    return Dataset(X / scale, data.y.copy(), data.w_true, True, data.feature_names)


def pve(data: Dataset) -> float:
    """Realised proportion of variance explained, ``|Xw|^2 / (|Xw|^2 + |eps|^2)``."""
    signal = data.X @ data.w_true
    s2 = signal @ signal
    noise = data.y - signal
    return s2 / (s2 + noise @ noise)


def _parse_float(cell: str, row: int, col: int) -> float:
    text = cell.strip()
    if text == "" or text.lower() in ("na", "nan", "null"):
        raise MissingValueError(f"missing value at row {row}, column {col}")
    try:
        return float(text)
    except ValueError:
        raise IngestError(f"non-numeric cell {cell!r} at row {row}, column {col}") from None


def _is_numeric(cell: str) -> bool:
    if cell.strip().lower() in ("na", "null"):
        return True
    try:
        float(cell)
    except ValueError:
        return False
    return True


def ingest_matrix(path, response_column: str | int = -1, standardize_columns: bool = False) -> Dataset:
    """Read a comma-separated numeric table into a :class:`Dataset`.

    The first row is treated as a header when any of its cells is not a
    number.  ``response_column`` is a header name or a (possibly negative)
    column index.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise IngestError(f"{path}: empty table")
    header = None
    if any(c.strip() and not _is_numeric(c) for c in rows[0]):
        header, rows = [c.strip() for c in rows[0]], rows[1:]
    if not rows:
        raise IngestError(f"{path}: no data rows")
    width = len(header) if header is not None else len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise IngestError(f"{path}: ragged row {i + 1} ({len(r)} cells, expected {width})")
    table = np.array([[_parse_float(c, i + 1, j + 1) for j, c in enumerate(r)]
                      for i, r in enumerate(rows)])
    if isinstance(response_column, str) and not response_column.lstrip("-").isdigit():
        if header is None or response_column not in header:
            raise IngestError(f"response column {response_column!r} not found")
        col = header.index(response_column)
    else:
        col = int(response_column)
        if not -width <= col < width:
            raise IngestError(f"response column index {col} out of range")
        col %= width
    keep = [j for j in range(width) if j != col]
    names = [header[j] for j in keep] if header is not None else [f"x{j + 1}" for j in keep]
    data = Dataset(table[:, keep], table[:, col], feature_names=names)
    return standardize(data) if standardize_columns else data


def write_dataset(data: Dataset, path, response_name: str = "y") -> None:
    """Write ``data`` in the ingestion format (header row, response last)."""
    names = data.feature_names or [f"x{j + 1}" for j in range(data.p)]
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*names, response_name])
        for xi, yi in zip(data.X, data.y):
            writer.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])
