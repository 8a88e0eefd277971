"""Бенчмарк: одно цензурирование на эксперимент, все методы × сиды, метрики.

Маска общая для всех прогонов, оценка идёт по исходной матрице (truth), не по
замаскированной. Падение одного прогона записывается в отчёт со статусом
``failed``, остальные продолжаются.

Параллельный режим (``workers > 1``) гоняет прогоны в пуле потоков через
``run_in_executor``; отчёт собирается в одном месте в фиксированном порядке
(метод, сид), так что результат не зависит от числа воркеров.
"""

from __future__ import annotations

import asyncio
import logging
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from app.core.config import settings
from app.schemas.experiment import (
    ExperimentConfig,
    ExperimentReport,
    MethodSpec,
    MethodSummary,
    RunResult,
)
from app.services.dataset_io import read_composition
from app.services.methods import get_method, resolve_censor, run_method
from app.services.metrics import evaluate
from app.services.synthetic import CensoredData, apply_artificial_dl, generate_synthetic

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
TABLE_FILE = "results.csv"


def prepare_data(cfg: ExperimentConfig) -> CensoredData:
    if cfg.synthetic is not None:
        X = generate_synthetic(cfg.synthetic)
    else:
        X = read_composition(cfg.csv_path)
    return apply_artificial_dl(X, cfg.censor_quantile)


def run_single(spec: MethodSpec, seed: int, data: CensoredData) -> RunResult:
    """Один прогон метода; исключения превращаются в ``status='failed'``."""
    resolved = resolve_censor(get_method(spec.name), spec.options)
    tags = resolved.tags
    start = time.perf_counter()
    try:
        report = run_method(spec.name, data.X, data.limits, spec.options, seed)
        wall = time.perf_counter() - start
        metrics = evaluate(data.truth, report.X_imputed, data.X.mask, data.limits, columns=data.X.columns)
    except Exception as exc:
        logger.exception("run %s seed=%d failed", spec.label, seed)
        return RunResult(
            label=spec.label,
            method=resolved.name,
            seed=seed,
            tags=tags,
            status="failed",
            wall_time=time.perf_counter() - start,
            error=f"{type(exc).__name__}: {exc}",
        )
    logger.info("run %s seed=%d: %.3fs, ced=%s, rdcm=%s", spec.label, seed, wall, metrics.ced, metrics.rdcm)
    return RunResult(
        label=spec.label,
        method=resolved.name,
        seed=seed,
        tags=tags,
        status="ok",
        wall_time=wall,
        metrics=metrics,
        run=report.to_run_report(data.X.columns),
    )


def _median(values: list[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return float(statistics.median(present)) if present else None


def summarize(cfg: ExperimentConfig, results: list[RunResult]) -> list[MethodSummary]:
    summary: list[MethodSummary] = []
    for spec in cfg.methods:
        runs = [r for r in results if r.label == spec.label]
        resolved = resolve_censor(get_method(spec.name), spec.options)
        ok = [r for r in runs if r.status == "ok" and r.metrics is not None]
        summary.append(
            MethodSummary(
                label=spec.label,
                method=resolved.name,
                tags=resolved.tags,
                runs=len(runs),
                failures=len(runs) - len(ok),
                median_rdcm=_median([r.metrics.rdcm for r in ok]),
                median_ced=_median([r.metrics.ced for r in ok]),
                median_curious_above_dl=_median([float(r.metrics.curious_above_dl.count) for r in ok]),
                median_curious_nonpositive=_median([float(r.metrics.curious_nonpositive.count) for r in ok]),
                median_wall_time=_median([r.wall_time for r in ok]),
            )
        )
    return summary


def _assemble(cfg: ExperimentConfig, data: CensoredData, results: list[RunResult]) -> ExperimentReport:
    limits = {
        name: (float(v) if not np.isnan(v) else None) for name, v in zip(data.X.columns, data.limits.d)
    }
    report = ExperimentReport(
        n=data.X.n,
        D=data.X.D,
        masked_cells=data.X.m,
        detection_limits=limits,
        results=results,
        summary=summarize(cfg, results),
        warnings=list(data.warnings),
    )
    if cfg.output is not None:
        write_report(report, cfg.output)
    return report


def _validate_methods(cfg: ExperimentConfig) -> None:
    for spec in cfg.methods:
        get_method(spec.name)


def _jobs(cfg: ExperimentConfig) -> list[tuple[MethodSpec, int]]:
    return [(spec, seed) for spec in cfg.methods for seed in cfg.seeds]


async def run_experiment_async(cfg: ExperimentConfig) -> ExperimentReport:
    """Асинхронный вариант: прогоны в пуле потоков, не больше ``workers`` одновременно."""
    _validate_methods(cfg)
    data = prepare_data(cfg)
    workers = cfg.workers or settings.workers
    loop = asyncio.get_running_loop()
    gate = asyncio.Semaphore(workers)

    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="deepimp-bench") as pool:

        async def _handle(spec: MethodSpec, seed: int) -> RunResult:
            async with gate:
                return await loop.run_in_executor(pool, run_single, spec, seed, data)

        results = await asyncio.gather(*(_handle(spec, seed) for spec, seed in _jobs(cfg)))
    return _assemble(cfg, data, list(results))


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    workers = cfg.workers or settings.workers
    if workers > 1:
        return asyncio.run(run_experiment_async(cfg))
    _validate_methods(cfg)
    data = prepare_data(cfg)
    results = [run_single(spec, seed, data) for spec, seed in _jobs(cfg)]
    return _assemble(cfg, data, results)


def long_table(report: ExperimentReport) -> pd.DataFrame:
    """Таблица для графиков: label, method, seed, metric, value."""
    rows: list[dict[str, object]] = []
    for r in report.results:
        values: dict[str, float | None] = {"wall_time": r.wall_time}
        if r.metrics is not None:
            values.update(
                rdcm=r.metrics.rdcm,
                ced=r.metrics.ced,
                curious_above_dl=float(r.metrics.curious_above_dl.count),
                curious_nonpositive=float(r.metrics.curious_nonpositive.count),
            )
        if r.run is not None:
            values["iterations"] = float(r.run.iterations)
        for metric, value in values.items():
            if value is not None:
                rows.append({"label": r.label, "method": r.method, "seed": r.seed, "metric": metric, "value": value})
    return pd.DataFrame(rows, columns=["label", "method", "seed", "metric", "value"])


def write_report(report: ExperimentReport, output: Path) -> tuple[Path, Path]:
    """Пишет ``report.json`` и ``results.csv`` в каталог ``output``."""
    output = Path(output)
    output.mkdir(parents=True, exist_ok=True)
    json_path = output / REPORT_FILE
    csv_path = output / TABLE_FILE
    json_path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    long_table(report).to_csv(csv_path, index=False, float_format=settings.float_format)
    logger.info("bench report written to %s", output)
    return json_path, csv_path
