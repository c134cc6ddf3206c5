"""Experiment runner: replications over an ``n`` sweep, raw and aggregate tables."""
from __future__ import annotations

import csv
import logging
import math
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..datagen import Covariance, Dataset, Task, sample_splits
from ..metrics import auc, mse, selection_metrics
from ..penalties import cd_fit
from .config import ExperimentConfig, Protocol, dump_config
from .methods import Context, fit_cv_k, fit_fixed_k, k_grid_for, roc_points

log = logging.getLogger(__name__)

RAW_COLUMNS = ["method", "n", "replication", "p", "k_true", "snr", "rho_or_design", "k",
               "gamma_or_lambda", "A", "FDR", "TF", "FF", "MSE_val", "MSE_test_or_1minusAUC",
               "seconds", "relative_time", "seed", "status"]
METRIC_COLUMNS = ["k", "A", "FDR", "TF", "FF", "MSE_val", "MSE_test_or_1minusAUC",
                  "seconds", "relative_time"]
TIMING_COLUMNS = ("seconds", "relative_time")


class EmptyInputError(ValueError):
    """A results table without rows."""


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    raw: list[dict]
    aggregate: list[dict]

    @property
    def failures(self) -> int:
        return sum(1 for r in self.raw if r["status"].startswith("error"))


def replication_seed(master: int, n: int, replication: int) -> int:
    """Seed of one replication; independent of the method so comparisons are paired."""
    return int(np.random.SeedSequence([master, n, replication]).generate_state(1, np.uint64)[0])


def _design_label(cfg: ExperimentConfig) -> str:
    s = cfg.spec
    return f"{s.rho:g}" if s.covariance is Covariance.TOEPLITZ else s.covariance.value


def _test_score(w, b, test: Dataset, task: Task) -> float:
    if task is Task.CLASSIFICATION:
        return 1.0 - auc(test.X @ w + b, test.y)
    return mse(w, test, b)


def replication_data(cfg: ExperimentConfig, n: int, rep: int):
    """``(seed, spec, (train, valid, test))`` of one replication, as the harness draws it."""
    seed = replication_seed(cfg.master_seed, n, rep)
    spec = cfg.spec.with_(n=n, seed=seed)
    n_valid = max(2, int(round(cfg.valid_ratio * n)))
    return seed, spec, sample_splits(spec, n_valid=n_valid, n_test=cfg.n_test)


def _run_cell(cfg: ExperimentConfig, n: int, rep: int) -> list[dict]:
    """All methods on one replication at one sample size."""
    seed, spec, (train, valid, test) = replication_data(cfg, n, rep)
    ctx = Context(spec.task, cfg.solvers)
    base = {"n": n, "replication": rep, "p": spec.p, "k_true": spec.k_true, "snr": spec.snr,
            "rho_or_design": _design_label(cfg), "seed": seed}

    lasso_seconds = math.nan
    if cfg.record_timing:
        t0 = time.perf_counter()
        cd_fit(train, ctx.penalised_loss())
        lasso_seconds = time.perf_counter() - t0

    rows = []
    k_grid = k_grid_for(cfg.k_grid, spec.p, n, spec.k_true)
    for method in cfg.methods:
        row = dict(base, method=method)
        t0 = time.perf_counter()
        try:
            if cfg.protocol is Protocol.ROC:
                points = roc_points(method, train, valid, k_grid, ctx)
                seconds = time.perf_counter() - t0
                for pt in points:
                    r = dict(row, k=pt.k, gamma_or_lambda=pt.hp, TF=pt.tf, FF=pt.ff,
                             A=pt.tf / spec.k_true,
                             FDR=pt.ff / (pt.tf + pt.ff) if pt.tf + pt.ff else 0.0,
                             MSE_val=math.nan, MSE_test_or_1minusAUC=math.nan,
                             status=pt.note or "ok")
                    rows.append(_timed(r, seconds, lasso_seconds, cfg.record_timing))
                continue
            if cfg.protocol is Protocol.FIXED_K:
                fit = fit_fixed_k(method, train, valid, cfg.fixed_k, ctx)
            else:
                fit = fit_cv_k(method, train, valid, k_grid, ctx)
            seconds = time.perf_counter() - t0
            sel = selection_metrics(fit.w, train.w_true)
            val = fit.val_score if ctx.criterion == "mse" else 1.0 - fit.val_score
            row.update(k=int(np.count_nonzero(fit.w)), gamma_or_lambda=fit.hp, A=sel.accuracy,
                       FDR=sel.fdr, TF=sel.tf, FF=sel.ff, MSE_val=val,
                       MSE_test_or_1minusAUC=_test_score(fit.w, fit.intercept, test, spec.task),
                       status=fit.note or "ok")
            rows.append(_timed(row, seconds, lasso_seconds, cfg.record_timing))
        except Exception as exc:  # one failing cell must not abort the sweep
            log.exception("method %s failed at n=%d replication %d", method, n, rep)
            row.update({c: math.nan for c in METRIC_COLUMNS},
                       gamma_or_lambda=math.nan, status=f"error: {type(exc).__name__}: {exc}")
            rows.append(row)
    return rows


def _timed(row, seconds, baseline, record):
    if record:
        row["seconds"] = seconds
        row["relative_time"] = seconds / baseline if baseline > 0 else math.nan
    else:
        row["seconds"] = row["relative_time"] = math.nan
    return row


def _canonical(rows: list[dict], methods) -> list[dict]:
    order = {m: i for i, m in enumerate(methods)}
    return sorted(rows, key=lambda r: (r["n"], r["replication"], order[r["method"]],
                                       -1 if _isnan(r.get("k")) else r["k"]))


def _isnan(v) -> bool:
    return v is None or (isinstance(v, float) and math.isnan(v))


def aggregate(rows: list[dict], by_k: bool = False) -> list[dict]:
    """Mean and standard deviation (ddof=1; 0 for a single row) per method and n.

    Rows in error are counted but excluded from the statistics.
    """
    groups: dict[tuple, list[dict]] = defaultdict(list)
    order = []
    for r in rows:
        key = (r["method"], int(r["n"])) + ((r["k"],) if by_k else ())
        if key not in groups:
            order.append(key)
        groups[key].append(r)
    out = []
    for key in order:
        members = groups[key]
        ok = [r for r in members if not str(r["status"]).startswith("error")]
        agg = {"method": key[0], "n": key[1]}
        if by_k:
            agg["k_target"] = key[2]
        agg["count"] = len(ok)
        agg["failed"] = len(members) - len(ok)
        for col in METRIC_COLUMNS:
            vals = np.array([float(r[col]) for r in ok], dtype=float)
            vals = vals[np.isfinite(vals)]
            agg[f"mean_{col}"] = float(np.mean(vals)) if vals.size else math.nan
            agg[f"std_{col}"] = float(np.std(vals, ddof=1)) if vals.size > 1 else (
                0.0 if vals.size else math.nan)
        out.append(agg)
    return out


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every ``(n, replication, method)`` cell and aggregate.

    Each ``(n, replication)`` pair generates its data once from a seed
    derived from ``master_seed`` and shares it among all methods.  Rows are
    put in canonical order, so ``workers > 1`` never changes the output.
    """
    tasks = [(n, rep) for n in cfg.n_grid for rep in range(cfg.replications)]
    rows: list[dict] = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            for part in pool.map(_run_cell, [cfg] * len(tasks), *zip(*tasks)):
                rows.extend(part)
    else:
        for n, rep in tasks:
            log.info("n=%d replication %d", n, rep)
            rows.extend(_run_cell(cfg, n, rep))
    rows = _canonical(rows, cfg.methods)
    return ExperimentResult(cfg, rows, aggregate(rows, by_k=cfg.protocol is Protocol.ROC))


# ------------------------------------------------------------------- output

def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (np.floating, np.integer)):
        return repr(value.item())
    return str(value)


def write_table(rows: list[dict], path, columns=None) -> None:
    if not rows:
        raise EmptyInputError("no rows to write")
    columns = columns or list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])


def write_results(result: ExperimentResult, outdir=None) -> dict[str, Path]:
    """Write ``raw.csv``, ``aggregate.csv`` and the resolved ``config.ini``."""
    out = Path(outdir or result.config.output)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"raw": out / "raw.csv", "aggregate": out / "aggregate.csv", "config": out / "config.ini"}
    write_table(result.raw, paths["raw"], RAW_COLUMNS)
    write_table(result.aggregate, paths["aggregate"])
    paths["config"].write_text(dump_config(result.config))
    return paths


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for key, val in r.items():
            if key in ("method", "status", "rho_or_design"):
                continue
            try:
                r[key] = int(val) if key in ("n", "replication", "p", "k_true", "seed") else float(val)
            except ValueError:
                pass
    return rows


PLOT_KINDS = {
    "accuracy_vs_n": "A",
    "fdr_vs_n": "FDR",
    "mse_vs_n": "MSE_test_or_1minusAUC",
    "time_vs_n": "relative_time",
    "roc_tf_ff": None,
}


def emit_plot_data(rows: list[dict], kind: str, outdir) -> list[Path]:
    """One ``<kind>__<method>.csv`` series file per method.

    ``*_vs_n`` series hold ``x, mean, stddev`` rows over ``n`` (time series
    add ``log10_mean``); ``roc_tf_ff`` holds mean ``FF, TF`` pairs sorted by
    ``k``, one file per method and ``n``.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {', '.join(PLOT_KINDS)}")
    if not rows:
        raise EmptyInputError("results table is empty")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    methods = list(dict.fromkeys(r["method"] for r in rows))
    ok = [r for r in rows if not str(r["status"]).startswith("error")]
    written = []
    if kind == "roc_tf_ff":
        for m in methods:
            for n in sorted({r["n"] for r in ok if r["method"] == m}):
                sub = [r for r in ok if r["method"] == m and r["n"] == n]
                by_k = defaultdict(list)
                for r in sub:
                    by_k[float(r["k"])].append(r)
                path = out / f"{kind}__{m}__n{n}.csv"
                series = []
                for k in sorted(by_k):
                    tf = _finite_mean([float(r["TF"]) for r in by_k[k]])
                    ff = _finite_mean([float(r["FF"]) for r in by_k[k]])
                    series.append({"k": k, "FF": ff, "TF": tf})
                write_table(series, path, ["k", "FF", "TF"])
                written.append(path)
        return written
    col = PLOT_KINDS[kind]
    for m in methods:
        series = []
        for r in aggregate([r for r in rows if r["method"] == m]):
            row = {"x": r["n"], "mean": r[f"mean_{col}"], "stddev": r[f"std_{col}"]}
            if kind == "time_vs_n":
                mean = row["mean"]
                row["log10_mean"] = math.log10(mean) if mean > 0 else math.nan
            series.append(row)
        path = out / f"{kind}__{m}.csv"
        write_table(series, path)
        written.append(path)
    return written


def _finite_mean(vals) -> float:
    arr = np.array(vals, dtype=float)
    arr = arr[np.isfinite(arr)]
    return float(arr.mean()) if arr.size else math.nan
