"""Командная строка: ``impute``, ``bench``, ``metrics``.

Коды выхода: 0 — успех, 2 — ошибка использования/валидации (флаги, битый
CSV, нет предела обнаружения, несовпадение размеров, нет файла),
1 — внутренняя ошибка. Несходимость EM не ошибка: предупреждение попадает
в отчёт, код выхода 0.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import ConfigurationError, DeepImpError, ImputationError
from app.core.logging import setup_logging
from app.schemas.composition import CompositionMatrix, DetectionLimits
from app.schemas.config import MethodOptions
from app.schemas.experiment import ExperimentConfig
from app.services.bench import run_experiment
from app.services.dataset_io import (
    read_composition,
    read_detection_limits,
    read_mask,
    read_matrix,
    write_matrix,
)
from app.services.methods import get_method, method_names, run_method
from app.services.metrics import evaluate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2

_NETWORK_FLAGS = ("eps", "maxiter", "epochs", "patience", "dropout", "net_profile")


def _method_options(args: argparse.Namespace) -> MethodOptions:
    return MethodOptions(
        k=args.k,
        eps=args.eps,
        maxiter=args.maxiter,
        epochs=args.epochs,
        patience=args.patience,
        dropout=args.dropout,
        net_profile=args.net_profile,
        censor=False if args.no_censor else None,
    )


def _check_flags(args: argparse.Namespace) -> None:
    """Несогласованные флаги отклоняются до любых вычислений."""
    info = get_method(args.method)
    if not info.is_network:
        given = [f"--{name.replace('_', '-')}" for name in _NETWORK_FLAGS if getattr(args, name) is not None]
        if args.no_censor:
            given.append("--no-censor")
        if given:
            raise ConfigurationError(f"{args.method} is a baseline; {', '.join(given)} only apply to network methods")
    if args.dl_quantile is not None and not 0 <= args.dl_quantile < 1:
        raise ConfigurationError(f"--dl-quantile must be in [0, 1), got {args.dl_quantile}")


def fallback_limits(X: CompositionMatrix, limits: DetectionLimits, q: float) -> DetectionLimits:
    """Недостающие пределы — q-квантиль наблюдённых значений столбца (q=0 — минимум)."""
    d = np.array(limits.d, copy=True)
    for j in X.masked_columns():
        if np.isnan(d[j]):
            observed = X.values[~X.mask[:, j], j]
            if observed.size == 0:
                raise ConfigurationError(f"column {X.columns[j]} has no observed values to derive a detection limit")
            d[j] = float(np.quantile(observed, q))
            logger.warning("column %s: detection limit %.6g taken from the %.3g quantile", X.columns[j], d[j], q)
    return DetectionLimits(d)


def cmd_impute(args: argparse.Namespace) -> int:
    _check_flags(args)
    options = _method_options(args)
    seed = settings.default_seed if args.seed is None else args.seed

    X = read_composition(args.input)
    limits = read_detection_limits(args.dl_file, X.columns) if args.dl_file else DetectionLimits.empty(X.D)
    if args.dl_quantile is not None:
        limits = fallback_limits(X, limits, args.dl_quantile)
    limits.validate_for(X)

    report = run_method(args.method, X, limits, options, seed)
    out = write_matrix(args.output, report.X_imputed, X.columns)
    run = report.to_run_report(X.columns)
    report_path = Path(args.report) if args.report else out.with_suffix(".report.json")
    report_path.write_text(run.model_dump_json(indent=2), encoding="utf-8")

    for msg in run.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    print(f"{args.method}: {X.m} cells imputed in {run.iterations} iterations -> {out}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    path = Path(args.config)
    if not path.is_file():
        raise FileNotFoundError(f"file not found: {path}")
    cfg = ExperimentConfig.model_validate_json(path.read_text(encoding="utf-8"))
    updates: dict[str, object] = {}
    if args.output:
        updates["output"] = Path(args.output)
    if args.workers:
        updates["workers"] = args.workers
    if updates:
        cfg = ExperimentConfig.model_validate({**cfg.model_dump(), **updates})

    report = run_experiment(cfg)
    table = pd.DataFrame([s.model_dump() for s in report.summary]).drop(columns=["tags"])
    print(table.to_string(index=False))
    failed = [r for r in report.results if r.status == "failed"]
    for r in failed:
        print(f"failed: {r.label} seed={r.seed}: {r.error}", file=sys.stderr)
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    truth, columns = read_matrix(args.truth)
    imputed, imputed_columns = read_matrix(args.imputed)
    if truth.shape != imputed.shape:
        raise ConfigurationError(f"truth shape {truth.shape} != imputed shape {imputed.shape}")
    if columns != imputed_columns:
        raise ConfigurationError("truth and imputed files have different headers")
    if args.mask:
        mask = read_mask(args.mask, truth.shape)
    elif args.input:
        censored, _ = read_matrix(args.input)
        if censored.shape != truth.shape:
            raise ConfigurationError(f"input shape {censored.shape} != truth shape {truth.shape}")
        mask = censored == 0
    else:
        raise ConfigurationError("either --mask or --input (censored data with zeros) is required")
    limits = read_detection_limits(args.dl_file, columns) if args.dl_file else DetectionLimits.empty(len(columns))

    metrics = evaluate(truth, imputed, mask, limits, columns=columns)
    payload = metrics.model_dump_json(indent=2)
    if args.report:
        Path(args.report).write_text(payload, encoding="utf-8")
    print(payload)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deepimp", description="Rounded-zero imputation for compositional data.")
    sub = parser.add_subparsers(dest="command", required=True)

    imp = sub.add_parser("impute", help="impute rounded zeros in a CSV")
    imp.add_argument("--input", required=True, help="CSV with header; 0 marks a rounded zero")
    imp.add_argument("--output", required=True, help="imputed CSV")
    imp.add_argument("--method", default="deepImpCoDa-dl", help=f"one of: {', '.join(method_names())}")
    imp.add_argument("--dl-file", help="one-row CSV with detection limits")
    imp.add_argument("--dl-quantile", type=float, help="fallback limit: quantile of observed values")
    imp.add_argument("--k", type=int, help="neighbours for aknn/knn")
    imp.add_argument("--eps", type=float)
    imp.add_argument("--maxiter", type=int)
    imp.add_argument("--epochs", type=int)
    imp.add_argument("--patience", type=int)
    imp.add_argument("--dropout", type=float)
    imp.add_argument("--net-profile", choices=("desk", "full", "paper"), help="full and paper are the same 1000…100 network")
    imp.add_argument("--seed", type=int, help=f"default {settings.default_seed}")
    imp.add_argument("--no-censor", action="store_true", help="run the network without the detection-limit clamp")
    imp.add_argument("--report", help="JSON run report (default: <output>.report.json)")
    imp.set_defaults(handler=cmd_impute)

    bench = sub.add_parser("bench", help="run an experiment config (JSON)")
    bench.add_argument("--config", required=True)
    bench.add_argument("--output", help="directory for report.json and results.csv")
    bench.add_argument("--workers", type=int)
    bench.set_defaults(handler=cmd_bench)

    met = sub.add_parser("metrics", help="score an imputation against the truth")
    met.add_argument("--truth", required=True)
    met.add_argument("--imputed", required=True)
    met.add_argument("--mask", help="CSV of 0/1 flags, 1 = imputed cell")
    met.add_argument("--input", help="censored CSV; its zeros define the mask")
    met.add_argument("--dl-file")
    met.add_argument("--report", help="write MetricsReport JSON here")
    met.set_defaults(handler=cmd_metrics)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    setup_logging()

    try:
        return args.handler(args)
    except ImputationError:
        logger.exception("imputation failed")
        return EXIT_INTERNAL
    except ValidationError as exc:
        print(f"error: invalid configuration:\n{exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DeepImpError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        logger.exception("unexpected error")
        return EXIT_INTERNAL
