"""Built-in desk-scale experiment presets.

Regression and classification regimes shrink the reference grids 100x in
``p`` and 10x in ``k_true`` (the low-noise regression cell becomes p=200,
k_true=10) while keeping correlation and SNR.  Classification presets pair
the hinge loss (cio, ss) with the logistic loss (enet, mcp, scad), as in
the reference experiments; whether that cross-loss comparison is fair is
left to the reader of the results.  CIO runs under a 10 s limit here.
"""
from __future__ import annotations

import copy

from ..datagen import Covariance, SyntheticSpec, Task, WeightScheme
from .config import ExperimentConfig, Protocol, SolverSettings

ALL = ("cio", "ss", "lasso", "enet", "mcp", "scad")
CI_SOLVERS = SolverSettings(cio_time_limit=10.0)

_NOISE = {  # name: (snr, p, k_true) for regression
    "low-noise": (6.0, 200, 10),
    "medium-noise": (1.0, 100, 5),
    "high-noise": (0.05, 20, 2),
}
_CLASS_NOISE = {
    "low-noise": (6.0, 100, 10),
    "medium-noise": (1.0, 50, 5),
    "high-noise": (0.05, 10, 2),
}


def _toeplitz(name, snr, p, k, rho, task=Task.REGRESSION, n_grid=(100, 250, 500, 1000)):
    spec = SyntheticSpec(n=max(n_grid), p=p, k_true=k, covariance=Covariance.TOEPLITZ,
                         rho=rho, snr=snr, task=task)
    return ExperimentConfig(name=name, methods=ALL, spec=spec, n_grid=n_grid,
                            protocol=Protocol.FIXED_K, solvers=CI_SOLVERS, output=f"results/{name}")


def _build() -> dict[str, ExperimentConfig]:
    out = {}
    for label, (snr, p, k) in _NOISE.items():
        for suffix, rho in (("", 0.2), ("-high-corr", 0.7)):
            name = f"toeplitz-{label}{suffix}"
            out[name] = _toeplitz(name, snr, p, k, rho)
        name = f"hardmi-{label}"
        spec = SyntheticSpec(n=5000, p=max(p // 2, k + 1), k_true=k, covariance=Covariance.HARD_MI,
                             snr=snr, weight_scheme=WeightScheme.UNIFORM_OVER_ROOT)
        out[name] = ExperimentConfig(name=name, methods=("cio", "lasso", "enet", "mcp", "scad"),
                                     spec=spec, n_grid=(500, 1000, 2000, 5000),
                                     solvers=CI_SOLVERS, output=f"results/{name}")
    for label, (snr, p, k) in _CLASS_NOISE.items():
        for suffix, rho in (("", 0.2), ("-high-corr", 0.7)):
            name = f"class-toeplitz-{label}{suffix}"
            out[name] = _toeplitz(name, snr, p, k, rho, Task.CLASSIFICATION,
                                  n_grid=(200, 500, 1000, 2000))
    spec = SyntheticSpec(n=100, p=20, k_true=3, rho=0.2, snr=6.0)
    out["smoke"] = ExperimentConfig(name="smoke", methods=ALL, spec=spec, n_grid=(60, 120),
                                    replications=2, n_test=200,
                                    solvers=SolverSettings(cio_time_limit=5.0, gamma_steps=6,
                                                           lambda_count=30),
                                    output="results/smoke")
    return out


PRESETS = _build()


def get_preset(name: str) -> ExperimentConfig:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; see `bench presets`") from None


def describe(cfg: ExperimentConfig) -> str:
    s = cfg.spec
    design = f"rho={s.rho:g}" if s.covariance is Covariance.TOEPLITZ else s.covariance.value
    return (f"{cfg.name:<34} {s.task.value:<14} p={s.p:<4} k_true={s.k_true:<3} "
            f"snr={s.snr:<5g} {design:<9} n={','.join(map(str, cfg.n_grid))}")
