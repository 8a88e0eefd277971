"""Синтетические данные и искусственное цензурирование.

Квантиль предела — type 7 (линейная интерполяция, ``np.quantile`` по
умолчанию), маскируются ячейки строго ниже него: при q=0.05 и n=100 это ровно
5 наименьших значений столбца (если среди них нет совпадений).
"""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np

from app.core.errors import InsufficientDataError, ShapeError
from app.schemas.composition import CompositionMatrix, DetectionLimits, default_columns
from app.schemas.experiment import SyntheticSpec
from app.services.coda import closure

logger = logging.getLogger(__name__)

# Столько наблюдённых строк должно остаться в каждом столбце после цензурирования.
MIN_OBSERVED_AFTER_CENSORING = 5


class CensoredData(NamedTuple):
    X: CompositionMatrix
    limits: DetectionLimits
    truth: np.ndarray
    warnings: list[str]


def generate_synthetic(spec: SyntheticSpec) -> CompositionMatrix:
    """X = exp(F·L + μ + шум); детерминирован по ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    F = rng.standard_normal((spec.n, spec.factors))
    L = rng.normal(0.0, spec.loading_scale, size=(spec.factors, spec.D))
    mu = rng.uniform(-spec.log_mean_spread, spec.log_mean_spread, size=spec.D)
    noise = spec.noise_scale * rng.standard_normal((spec.n, spec.D))
    values = np.exp(F @ L + mu + noise)
    if spec.close_to is not None:
        values = closure(values, spec.close_to)
    return CompositionMatrix(values, np.zeros(values.shape, dtype=bool), default_columns(spec.D))


def censor_with_limits(
    truth: np.ndarray, limits: DetectionLimits, columns: tuple[str, ...] = ()
) -> CensoredData:
    """Обнуляет ячейки строго ниже d_j; столбцы без предела не трогаются."""
    truth = np.asarray(truth, dtype=np.float64)
    if truth.ndim != 2 or truth.shape[1] != limits.D:
        raise ShapeError(f"{limits.D} detection limits for data of shape {truth.shape}")
    columns = tuple(columns) or default_columns(truth.shape[1])
    mask = np.zeros(truth.shape, dtype=bool)
    for j in range(truth.shape[1]):
        if not limits.has(j):
            continue
        mask[:, j] = truth[:, j] < limits.d[j]
        left = int((~mask[:, j]).sum())
        if left < MIN_OBSERVED_AFTER_CENSORING:
            raise InsufficientDataError(
                f"column {columns[j]}: only {left} observed rows left after censoring "
                f"(need {MIN_OBSERVED_AFTER_CENSORING})"
            )
    values = np.where(mask, 0.0, truth)
    return CensoredData(CompositionMatrix(values, mask, columns), limits, truth.copy(), [])


def apply_artificial_dl(
    X: CompositionMatrix | np.ndarray, q: float, columns: tuple[str, ...] = ()
) -> CensoredData:
    """Предел обнаружения d_j = q-квантиль столбца, ячейки ниже него — округлённые нули."""
    if not 0 < q < 1:
        raise ValueError(f"quantile must be in (0, 1), got {q}")
    if isinstance(X, CompositionMatrix):
        if X.m:
            raise ShapeError("artificial censoring needs a complete matrix without rounded zeros")
        columns = columns or X.columns
        truth = np.asarray(X.values)
    else:
        truth = np.asarray(X, dtype=np.float64)
    if truth.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {truth.shape}")
    columns = tuple(columns) or default_columns(truth.shape[1])

    warnings: list[str] = []
    limits = np.full(truth.shape[1], np.nan)
    for j in range(truth.shape[1]):
        col = truth[:, j]
        if np.ptp(col) == 0:
            msg = f"column {columns[j]} is constant; not censored"
            logger.warning(msg)
            warnings.append(msg)
            continue
        limits[j] = float(np.quantile(col, q))

    data = censor_with_limits(truth, DetectionLimits(limits), columns)
    logger.info("censored %d of %d cells at quantile %.3g", data.X.m, truth.size, q)
    return data._replace(warnings=warnings)


def adversarial_knn_fixture() -> CensoredData:
    """12×3 набор, где у всех доноров первой части значения выше предела.

    Евклидов kNN переносит значения доноров как есть и поэтому импутирует
    выше d_1; методы с отсечкой остаются в (0, d_1].
    """
    base = np.arange(1.0, 13.0)
    truth = np.column_stack([base, 2.0 * base + 1.0, 30.0 - base])
    limits = DetectionLimits(np.array([3.5, np.nan, np.nan]))
    return censor_with_limits(truth, limits, ("V1", "V2", "V3"))
