"""``bench`` command line.

    bench run <config-file | preset> [--output DIR] [--workers N] [--replications R]
    bench plot <raw.csv> --kind KIND [--output DIR]
    bench presets [--show NAME]
    bench fit --method M --data CSV --response COL [--k K] [--lambda L] [--gamma G]

Exit status: 0 on success, 1 on configuration or input errors, 2 when some
experiment cells failed.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from ..datagen import IngestError, Task, ingest_matrix
from .config import ConfigError, ExperimentConfig, dump_config, load_config
from .harness import (PLOT_KINDS, EmptyInputError, emit_plot_data, read_table, run_experiment,
                      write_results)
from .methods import PENALISED, SUBSET, Context
from .presets import PRESETS, describe, get_preset

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2

log = logging.getLogger("sparsebench")


def _resolve(target: str) -> ExperimentConfig:
    path = Path(target)
    if path.is_file():
        return load_config(path)
    if target in PRESETS:
        return get_preset(target)
    raise ConfigError(f"{target!r} is neither a config file nor a preset name")


def cmd_run(args) -> int:
    cfg = _resolve(args.config)
    overrides = {}
    if args.output:
        overrides["output"] = Path(args.output)
    if args.workers:
        overrides["workers"] = args.workers
    if args.replications:
        overrides["replications"] = args.replications
    if args.no_timing:
        overrides["record_timing"] = False
    cfg = cfg.with_(**overrides) if overrides else cfg
    result = run_experiment(cfg)
    paths = write_results(result)
    print(f"wrote {paths['raw']} ({len(result.raw)} rows) and {paths['aggregate']}")
    if result.failures:
        print(f"{result.failures} cell(s) failed; see the status column", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_plot(args) -> int:
    rows = read_table(args.results)
    out = Path(args.output) if args.output else Path(args.results).parent / "plots"
    for path in emit_plot_data(rows, args.kind, out):
        print(path)
    return EXIT_OK


def cmd_presets(args) -> int:
    if args.show:
        sys.stdout.write(dump_config(get_preset(args.show)))
        return EXIT_OK
    for cfg in PRESETS.values():
        print(describe(cfg))
    return EXIT_OK


def cmd_fit(args) -> int:
    from ..cio import coefficients_from_support, cutting_plane_solve
    from ..losses import LossModel
    from ..penalties import cd_fit, write_path
    from ..saddle import SubgradientConfig, subgradient_solve
    from ..tuning import gamma0

    data = ingest_matrix(args.data, args.response, standardize_columns=not args.raw)
    task = Task.CLASSIFICATION if args.loss in ("logistic", "hinge", "l2svm") else Task.REGRESSION
    method = args.method
    if method in SUBSET:
        if args.k is None:
            raise ConfigError(f"--k is required for {method}")
        model = LossModel(args.loss or "ols")
        xm, ym = data.X.mean(axis=0), 0.0 if model.is_classification else float(data.y.mean())
        centred = type(data)(data.X - xm, data.y - ym)
        gamma = args.gamma if args.gamma is not None else gamma0(centred, args.k)
        if method == "cio":
            support = cutting_plane_solve(centred, model, args.k, gamma,
                                          time_limit=args.time_limit).support
        else:
            support = subgradient_solve(centred, model, args.k,
                                        SubgradientConfig(gamma=gamma)).support
        w = coefficients_from_support(support, centred, model, gamma)
        intercept = ym - float(xm @ w)
    else:
        ctx = Context(task)
        model = ctx.penalised_loss() if args.loss is None else LossModel(args.loss)
        fam = PENALISED[method]
        alpha = args.alpha if method == "enet" else 1.0
        if args.lam is None and args.k is None:
            path = cd_fit(data, model, fam, alpha_mix=alpha)
            write_path(path, args.output or sys.stdout)
            return EXIT_OK
        if args.lam is not None:
            path = cd_fit(data, model, fam, [args.lam], alpha_mix=alpha)
            w, intercept = path.solutions[0], float(path.intercepts[0])
        else:
            path = cd_fit(data, model, fam, alpha_mix=alpha)
            i = int(np.argmin(np.abs(path.support_sizes - args.k)))
            w, intercept = path.solutions[i], float(path.intercepts[i])
    names = data.feature_names or [f"x{j + 1}" for j in range(data.p)]
    fh = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["feature", "coefficient"])
        writer.writerow(["(intercept)", repr(intercept)])
        for j in np.flatnonzero(w):
            writer.writerow([names[j], repr(float(w[j]))])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description="Sparse regression benchmarks.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file or preset")
    run.add_argument("config")
    run.add_argument("--output")
    run.add_argument("--workers", type=int)
    run.add_argument("--replications", type=int)
    run.add_argument("--no-timing", action="store_true",
                     help="leave timing columns empty (byte-reproducible output)")
    run.set_defaults(func=cmd_run)

    plot = sub.add_parser("plot", help="emit plot-data series from a raw results table")
    plot.add_argument("results")
    plot.add_argument("--kind", required=True, choices=sorted(PLOT_KINDS))
    plot.add_argument("--output")
    plot.set_defaults(func=cmd_plot)

    presets = sub.add_parser("presets", help="list built-in presets")
    presets.add_argument("--show", metavar="NAME", help="print a preset as a config file")
    presets.set_defaults(func=cmd_presets)

    fit = sub.add_parser("fit", help="fit one method on a CSV design matrix")
    fit.add_argument("--method", required=True, choices=SUBSET + tuple(PENALISED))
    fit.add_argument("--data", required=True)
    fit.add_argument("--response", default="-1", help="response column name or index")
    fit.add_argument("--loss", choices=["ols", "logistic", "hinge", "l2svm", "l1svr", "l2svr"])
    fit.add_argument("--k", type=int)
    fit.add_argument("--lambda", dest="lam", type=float)
    fit.add_argument("--gamma", type=float)
    fit.add_argument("--alpha", type=float, default=0.5, help="Elastic-Net mixing")
    fit.add_argument("--time-limit", type=float)
    fit.add_argument("--raw", action="store_true", help="do not standardise columns")
    fit.add_argument("--output")
    fit.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, IngestError, EmptyInputError, KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"bench: error: {msg}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
