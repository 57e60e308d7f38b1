"""Command-line interface.

Subcommands: fit, predict, mse, ci, simulate, report.  All randomness flows
from --seed through a documented derivation tree (command -> replicate ->
area -> purpose), so repeated invocations with the same seed are
byte-identical, independent of the worker count.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import io as sio
from .model import EstimationError, ValidationError, fit_ml
from .params import UndefinedValueError, parse_parameter
from .pipeline import run_informative, run_noninformative
from .simharness import (
    run_study,
    write_ecp_boxplots,
    write_ecp_table,
    write_rb_table,
    write_tstats,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _add_common(p: argparse.ArgumentParser, with_boot: bool = True):
    p.add_argument("--input", "-i", required=True, help="input dataset CSV")
    p.add_argument("--output", "-o", required=True, help="output path")
    p.add_argument("--param", "-p", action="append", default=None,
                   help="parameter spec (mean, exp_mean, quantile:P, poverty_gap:Z, gini); repeatable")
    p.add_argument("-L", type=int, default=500, help="prediction draws per area")
    p.add_argument("--seed", type=int, default=0, help="root seed of the derivation tree")
    if with_boot:
        p.add_argument("-B", type=int, default=200, help="bootstrap replicates")
        p.add_argument("--pipeline", choices=("noninformative", "informative"),
                       default="noninformative")
        p.add_argument("--pool-size", type=int, default=100, help="SIR candidate pool per draw")
        p.add_argument("--interaction", action="store_true",
                       help="include covariate-response interactions in the weight model")
        p.add_argument("--include-standard", action="store_true",
                       help="also compute the full-population single-bootstrap baseline (S)")


def _params(args) -> list:
    specs = args.param or ["mean"]
    return [parse_parameter(s) for s in specs]


def _run_pipeline(args, data, params, levels):
    if args.pipeline == "informative":
        return run_informative(
            data, params, L=args.L, B=args.B, pool_size=args.pool_size,
            rng_seed=args.seed, levels=levels, interaction=args.interaction,
            include_standard=args.include_standard,
        )
    return run_noninformative(
        data, params, L=args.L, B=args.B, rng_seed=args.seed, levels=levels,
        include_standard=args.include_standard,
    )


def cmd_fit(args) -> int:
    data = sio.ingest(args.input)
    fit = fit_ml(data)
    out = {
        "beta": [float(b) for b in fit.params.beta],
        "sigma2_u": fit.params.sigma2_u,
        "sigma2_e": fit.params.sigma2_e,
        "loglik": fit.loglik,
        "iterations": fit.iterations,
        "grad_norm": fit.grad_norm,
        "converged": fit.converged,
        "sigma2_u_on_boundary": fit.sigma2_u_on_boundary,
        "degenerate": fit.degenerate,
        "areas": {
            str(aid): {"u_hat": fit.u_hat[aid], "v2_hat": fit.v2_hat[aid]}
            for aid in sorted(fit.u_hat)
        },
    }
    with open(args.output, "w", encoding="utf-8") as fh:
        json.dump(out, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"fit written to {args.output} (loglik {fit.loglik:.6f})")
    return EXIT_OK


def cmd_predict(args) -> int:
    from .ebp import predict

    data = sio.ingest(args.input)
    params = _params(args)
    fit = fit_ml(data)
    rows = []
    for p in params:
        preds, _ = predict(fit, data, p, L=args.L, rng_seed=args.seed)
        for pr in preds:
            rows.append(
                {"parameter": p.name, "area_id": pr.area_id, "theta_hat": pr.theta_hat,
                 "mc_se": pr.mc_se, "L": pr.L}
            )
    sio.emit_predictions(rows, args.output)
    print(f"{len(rows)} predictions written to {args.output}")
    return EXIT_OK


def cmd_mse(args) -> int:
    data = sio.ingest(args.input)
    params = _params(args)
    result = _run_pipeline(args, data, params, levels=(0.95,))
    reports = {
        p.name: {ar.area_id: ar.reports[p.name] for ar in result.areas} for p in params
    }
    variants = tuple(v.strip() for v in args.variants.split(",")) if args.variants else (
        ("noBC", "Add", "Mult", "Comp", "HM") + (("S",) if args.include_standard else ())
    )
    sio.emit_report(reports, args.output, fmt=args.format, variants=variants)
    print(f"MSE report written to {args.output}")
    return EXIT_OK


def cmd_ci(args) -> int:
    data = sio.ingest(args.input)
    params = _params(args)
    levels = tuple(float(v) for v in args.levels.split(","))
    result = _run_pipeline(args, data, params, levels=levels)
    rows = []
    for ar in result.areas:
        for p in params:
            for (kind, level), rep in sorted(ar.intervals[p.name].items()):
                if rep is None:
                    continue
                rows.append(
                    {"parameter": p.name, "area_id": ar.area_id, "kind": kind,
                     "level": level, "lower": rep.lower, "upper": rep.upper,
                     "alpha_prime": rep.alpha_prime}
                )
    sio.emit_intervals(rows, args.output)
    print(f"{len(rows)} intervals written to {args.output}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    configs = sio.parse_sim_configs(args.config)
    if args.threads is not None:
        configs = [(lbl, _with_threads(cfg, args.threads)) for lbl, cfg in configs]
    os.makedirs(args.output_dir, exist_ok=True)
    levels = configs[0][1].levels
    if args.boxplot_level not in levels:
        args.boxplot_level = levels[-1]
    results = []
    for label, cfg in configs:
        results.append((label, run_study(cfg)))
        print(f"scenario {label}: done ({cfg.m_replicates} replicates)")
    design = configs[0][1].design
    if design == "informative":
        for mode in ("sampled", "nonsampled"):
            write_rb_table(results, os.path.join(args.output_dir, f"rb_{mode}.csv"), mode)
            write_ecp_table(results, os.path.join(args.output_dir, f"ecp_{mode}.csv"), mode)
            write_ecp_boxplots(results, args.output_dir, mode=mode, level=args.boxplot_level)
    else:
        write_rb_table(results, os.path.join(args.output_dir, "rb_table.csv"), "pooled")
        write_ecp_table(results, os.path.join(args.output_dir, "ecp_table.csv"), "pooled")
        write_ecp_boxplots(results, args.output_dir, mode="pooled", level=args.boxplot_level)
    write_tstats(results, os.path.join(args.output_dir, "tstats.csv"))
    n_failed = sum(len(r.failed_replicates) for _, r in results)
    print(f"tables written to {args.output_dir} ({n_failed} failed replicates)")
    return EXIT_OK


def _with_threads(cfg, threads: int):
    from dataclasses import replace

    return replace(cfg, threads=threads)


def cmd_report(args) -> int:
    rows = sio.read_report_jsonl(args.input)
    import csv as _csv

    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(sio.REPORT_COLUMNS)
        for r in rows:
            writer.writerow([sio._fmt(r[c]) if isinstance(r[c], float) else r[c]
                             for c in sio.REPORT_COLUMNS])
    methods = sorted({r["method"] for r in rows})
    print(f"{len(rows)} rows converted to {args.output} (methods: {', '.join(methods)})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="saebp",
        description="Empirical best prediction of small-area parameters with "
        "bootstrap MSE estimation and calibrated prediction intervals",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="maximum likelihood fit of the response model")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="Monte Carlo empirical-best prediction")
    _add_common(p, with_boot=False)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("mse", help="MSE estimation (all bias-correction variants)")
    _add_common(p)
    p.add_argument("--format", choices=("csv", "json-lines"), default="csv")
    p.add_argument("--variants", default=None,
                   help="comma-separated subset of noBC,Add,Mult,Comp,HM,S")
    p.set_defaults(func=cmd_mse)

    p = sub.add_parser("ci", help="prediction intervals (naive, calibrated, normal)")
    _add_common(p)
    p.add_argument("--levels", default="0.90,0.95,0.99")
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("simulate", help="run a Monte Carlo study from a config file")
    p.add_argument("--config", "-c", required=True, help="key-value config file")
    p.add_argument("--output-dir", "-o", required=True)
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (SAEBP_THREADS env var overrides)")
    p.add_argument("--boxplot-level", type=float, default=0.95)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="convert a json-lines MSE report to CSV")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (EstimationError, UndefinedValueError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
