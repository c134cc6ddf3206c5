"""Experiment configuration and its INI-file representation."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path

from ..datagen import Covariance, SyntheticSpec, Task, WeightScheme

METHODS = ("cio", "ss", "lasso", "enet", "mcp", "scad")


class Protocol(str, Enum):
    FIXED_K = "fixed_k"
    CV_K = "cv_k"
    ROC = "roc"


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class SolverSettings:
    """Per-method knobs; every field maps to a key of the config file."""

    # CIO / SS ridge schedule: gamma0 * 2^t for t < gamma_steps, abandoned
    # after gamma_patience steps without validation improvement
    gamma_steps: int = 10
    gamma_factor: float = 1.0
    gamma_normalized: bool = False
    gamma_patience: int | None = 2
    cio_time_limit: float | None = None   # None: 60 s regression, 180 s classification
    cio_epsilon: float = 1e-4
    cio_max_iterations: int | None = None
    ss_t_max: int = 200
    ss_gap_tol: float = 1e-4
    # penalised methods
    lambda_count: int = 100
    lambda_ratio: float | None = None
    enet_alphas: tuple[float, ...] = (0.2, 0.5, 0.8)
    mcp_shape: float = 3.0
    scad_shape: float = 3.7
    calibrate_steps: int = 20


@dataclass
class ExperimentConfig:
    """A full benchmark: data regime, n sweep, methods and protocol.

    ``spec.n`` and ``spec.seed`` are ignored (normalised to ``max(n_grid)``
    and 0); training sizes come from ``n_grid``, seeds from ``master_seed``.
    Validation sets have ``valid_ratio * n`` rows and test sets ``n_test``.
    """

    name: str
    methods: tuple[str, ...]
    spec: SyntheticSpec
    n_grid: tuple[int, ...]
    replications: int = 10
    protocol: Protocol = Protocol.FIXED_K
    master_seed: int = 0
    k: int | None = None
    k_grid: tuple[int, ...] | None = None
    valid_ratio: float = 0.5
    n_test: int = 1000
    record_timing: bool = True
    workers: int = 1
    output: Path = Path("results")
    solvers: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        self.protocol = Protocol(self.protocol)
        self.methods = tuple(self.methods)
        self.n_grid = tuple(int(n) for n in self.n_grid)
        self.output = Path(self.output)
        if not self.methods:
            raise ConfigError("at least one method is required")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {', '.join(METHODS)}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods must be distinct")
        if not self.n_grid or min(self.n_grid) < 2:
            raise ConfigError("n_grid must be non-empty with every n >= 2")
        # n and seed of the spec are set per replication; normalise them
        self.spec = self.spec.with_(n=max(self.n_grid), seed=0)
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if self.k is not None and not 1 <= self.k <= self.spec.p:
            raise ConfigError("k must lie in [1, p]")
        if self.k_grid is not None and (not self.k_grid or min(self.k_grid) < 1
                                        or max(self.k_grid) > self.spec.p):
            raise ConfigError("k_grid entries must lie in [1, p]")
        if self.valid_ratio <= 0 or self.n_test < 2:
            raise ConfigError("valid_ratio must be positive and n_test at least 2")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    @property
    def fixed_k(self) -> int:
        return self.k if self.k is not None else self.spec.k_true

    def with_(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)


# ---------------------------------------------------------------- parsing

def _as_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _as_list(text: str, cast):
    parts = [t for t in text.replace(",", " ").split() if t]
    try:
        return tuple(cast(t) for t in parts)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _optional(cast):
    def conv(text: str):
        if text.strip().lower() in ("", "none", "auto"):
            return None
        return cast(text)
    return conv


_EXPERIMENT_KEYS = {
    "name": str,
    "methods": lambda t: _as_list(t, str),
    "n_grid": lambda t: _as_list(t, int),
    "replications": int,
    "protocol": Protocol,
    "master_seed": int,
    "k": _optional(int),
    "k_grid": _optional(lambda t: _as_list(t, int)),
    "valid_ratio": float,
    "n_test": int,
    "record_timing": _as_bool,
    "workers": int,
    "output": Path,
}

_DATA_KEYS = {
    "p": int,
    "k_true": int,
    "covariance": Covariance,
    "rho": float,
    "snr": float,
    "task": Task,
    "weight_scheme": WeightScheme,
}

_SOLVER_KEYS = {
    "gamma_steps": int,
    "gamma_factor": float,
    "gamma_normalized": _as_bool,
    "gamma_patience": _optional(int),
    "cio_time_limit": _optional(float),
    "cio_epsilon": float,
    "cio_max_iterations": _optional(int),
    "ss_t_max": int,
    "ss_gap_tol": float,
    "lambda_count": int,
    "lambda_ratio": _optional(float),
    "enet_alphas": lambda t: _as_list(t, float),
    "mcp_shape": float,
    "scad_shape": float,
    "calibrate_steps": int,
}


def _section(parser, name, keys, required=()):
    if not parser.has_section(name):
        if required:
            raise ConfigError(f"missing section [{name}]")
        return {}
    out = {}
    for key, raw in parser.items(name):
        if key not in keys:
            raise ConfigError(f"unknown key {key!r} in [{name}]")
        try:
            out[key] = keys[key](raw)
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[{name}] {key}: {exc}") from None
    missing = [k for k in required if k not in out]
    if missing:
        raise ConfigError(f"[{name}] missing required keys: {', '.join(missing)}")
    return out


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from INI text.

    With ``base``, or a ``preset`` key in ``[experiment]``, keys present in
    ``text`` override the base and nothing is required.  Otherwise
    ``[experiment]`` needs ``methods`` and ``n_grid`` and ``[data]`` needs
    ``p`` and ``k_true``.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if base is None and parser.has_option("experiment", "preset"):
        from .presets import get_preset

        try:
            base = get_preset(parser.get("experiment", "preset").strip())
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
        parser.remove_option("experiment", "preset")
    extra = set(parser.sections()) - {"experiment", "data", "solvers"}
    if extra:
        raise ConfigError(f"unknown sections: {', '.join(sorted(extra))}")
    strict = base is None
    exp = _section(parser, "experiment", _EXPERIMENT_KEYS,
                   ("methods", "n_grid") if strict else ())
    data = _section(parser, "data", _DATA_KEYS, ("p", "k_true") if strict else ())
    solv = _section(parser, "solvers", _SOLVER_KEYS)
    try:
        if strict:
            spec = SyntheticSpec(n=max(exp["n_grid"]), **data)
            solvers = SolverSettings(**solv)
            exp.setdefault("name", "experiment")
            return ExperimentConfig(spec=spec, solvers=solvers, **exp)
        spec = base.spec.with_(**data) if data else base.spec
        solvers = replace(base.solvers, **solv)
        return replace(base, spec=spec, solvers=solvers, **exp)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def _fmt(value) -> str:
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if value is None:
        return "auto"
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """INI text that :func:`parse_config` maps back to ``cfg``."""
    lines = ["[experiment]"]
    for key in _EXPERIMENT_KEYS:
        lines.append(f"{key} = {_fmt(getattr(cfg, key))}")
    lines += ["", "[data]"]
    for key in _DATA_KEYS:
        lines.append(f"{key} = {_fmt(getattr(cfg.spec, key))}")
    lines += ["", "[solvers]"]
    for f in fields(SolverSettings):
        lines.append(f"{f.name} = {_fmt(getattr(cfg.solvers, f.name))}")
    return "\n".join(lines) + "\n"
