"""Sparse regression by exact subset selection, its Boolean relaxation and penalised fits."""
from .cio import CutPool, coefficients_from_support, cutting_plane_solve, inner_value_grad
from .datagen import Dataset, SyntheticSpec, ingest_matrix, sample_dataset, sample_splits
from .losses import LossKind, LossModel
from .metrics import auc, mse, selection_metrics
from .penalties import Family, PenaltySpec, cd_fit, lambda_grid, univariate_prox
from .saddle import Support, SubgradientConfig, penalized_solve, subgradient_solve

__all__ = [
    "CutPool", "Dataset", "Family", "LossKind", "LossModel", "PenaltySpec", "SubgradientConfig",
    "Support", "SyntheticSpec", "auc", "cd_fit", "coefficients_from_support",
    "cutting_plane_solve", "ingest_matrix", "inner_value_grad", "lambda_grid", "mse",
    "penalized_solve", "sample_dataset", "sample_splits", "selection_metrics",
    "subgradient_solve", "univariate_prox",
]

__version__ = "0.1.0"
