"""Command line entry point: ``autoen fit | predict | bench | stats``.

Failures print one JSON object on stderr (``{"error": <code>, "message": ...}``)
and exit with status 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bench import BenchmarkConfig, emit_reports, mean_tables, require_complete, run_benchmark
from .dataset import Schema, load_csv, load_features
from .ensemble import AutoEnConfig, EconomyConfig, autoen_fit, ensemble_predict, export_trace_csv
from .errors import AutoEnError
from .persist import load_model, save_model
from .pipeline import default_portfolio, parse_portfolio
from .stats import ScoreTable, format_report


def _sidecar(data: str) -> Path:
    return Path(data).with_suffix(".schema")


def cmd_fit(args) -> int:
    schema = Schema.read(args.schema or _sidecar(args.data))
    d = load_csv(args.data, schema)
    portfolio = parse_portfolio(args.portfolio) if args.portfolio else default_portfolio()
    economy = EconomyConfig(args.sample_fraction, args.budget) if args.economy else None
    cfg = AutoEnConfig(ensemble_size=args.ensemble_size, economy=economy, metric=args.metric, seed=args.seed,
                       best_prefix_mode=args.best_prefix, n_jobs=args.n_jobs)
    model = autoen_fit(d, portfolio, cfg)
    model.metadata["schema"] = schema.to_text()
    save_model(model, args.out)
    if args.trace:
        export_trace_csv(model, args.trace)
    print(json.dumps({"model": str(args.out), "members": model.multiplicities, "metric": model.metric,
                      "holdout_test_score": model.holdout_test_score,
                      "failed_pipelines": sorted(model.failures)}))
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    if args.schema:
        schema = Schema.read(args.schema)
    elif "schema" in model.metadata:
        schema = Schema.parse(model.metadata["schema"])
    else:
        schema = Schema.read(_sidecar(args.data))
    d = load_features(args.data, schema)
    P = ensemble_predict(model, d)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["row", "predicted", *(f"p_{c}" for c in model.class_names)])
        for i, row in enumerate(P):
            w.writerow([i, model.class_names[int(np.argmax(row))], *(repr(float(v)) for v in row)])
    return 0


def cmd_bench(args) -> int:
    cfg = BenchmarkConfig.read(args.config)
    if args.output_dir:
        cfg.output_dir = Path(args.output_dir)
    if args.n_jobs is not None:
        cfg.n_jobs = args.n_jobs
    results, tables = run_benchmark(cfg)
    out = cfg.output_dir or Path("bench_results")
    for path in emit_reports(results, mean_tables(results), out):
        print(path)
    require_complete(results)
    return 0


def cmd_stats(args) -> int:
    table = ScoreTable.read_csv(args.scores, args.direction)
    if args.drop:
        table = table.drop(args.drop)
    report = format_report(table, args.control, args.alpha)
    if args.out:
        Path(args.out).write_text(report, encoding="utf-8")
    else:
        sys.stdout.write(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="autoen", description="Ensemble selection from a fixed pipeline portfolio.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="build an ensemble from a labelled CSV file")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", help="schema sidecar (default: <data>.schema)")
    p.add_argument("--portfolio", help="portfolio file (default: the bundled 40-pipeline portfolio)")
    p.add_argument("--economy", action="store_true", help="pre-filter pipelines on a small subsample")
    p.add_argument("--sample-fraction", type=float, default=0.10)
    p.add_argument("--budget", type=float, default=36.0, help="per-pipeline seconds in economy mode")
    p.add_argument("--ensemble-size", type=int, default=50)
    p.add_argument("--metric", choices=("auto", "roc_auc", "log_loss"), default="auto")
    p.add_argument("--best-prefix", action="store_true", help="keep the best-scoring prefix of the greedy picks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-jobs", type=int, default=1)
    p.add_argument("--trace", help="also write the selection trace CSV here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="class probabilities for a CSV file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", help="schema sidecar (default: the one stored in the model)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", help="run a k-fold benchmark campaign from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.add_argument("--n-jobs", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("stats", help="Friedman ranks and Holm post-hoc for a score table")
    p.add_argument("--scores", required=True)
    p.add_argument("--direction", choices=("higher", "lower"))
    p.add_argument("--control", help="control method (default: best average rank)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--drop", nargs="*", default=[], help="methods to leave out")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except AutoEnError as exc:
        code, message = exc.code, str(exc)
    except (OSError, ValueError, KeyError) as exc:
        code, message = type(exc).__name__, str(exc)
    print(json.dumps({"error": code, "message": message}), file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
