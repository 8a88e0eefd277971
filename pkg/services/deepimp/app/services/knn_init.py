"""Инициализация округлённых нулей до любых log-ratio вычислений.

* ``aknn`` — k ближайших соседей по расстоянию Эйтчисона на общей
  подкомпозиции + робастное среднее (медиана) перемасштабированных значений
  доноров, с отсечкой 0.999·d_j;
* ``dl65`` — 65% предела обнаружения;
* ``uniform_dl`` — равномерно на (0, d_j).

Наблюдённые ячейки не трогаются ни одним инициализатором (побитно).
"""

from __future__ import annotations

import logging

import numpy as np

from app.core.errors import ConfigurationError
from app.schemas.composition import CompositionMatrix, DetectionLimits
from app.schemas.config import InitConfig
from app.services.coda import clr

logger = logging.getLogger(__name__)

DL65_FRACTION = 0.65
# Инициализация держится строго ниже предела, чтобы цензурирование не
# стартовало в насыщении.
AKNN_CLAMP_FRACTION = 0.999


def _subcomposition_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Расстояние Эйтчисона между двумя векторами одинаковой подкомпозиции."""
    if a.shape[0] < 2:
        return 0.0
    return float(np.linalg.norm(clr(a) - clr(b)))


def aknn_fill(
    X: CompositionMatrix,
    d: DetectionLimits | None,
    k: int,
    *,
    clamp: bool = True,
) -> tuple[np.ndarray, list[str]]:
    """Ядро aknn: возвращает (заполненные значения, warnings).

    ``clamp=False`` — вариант бейзлайна ``knn_aitchison`` без учёта предела.
    """
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    values = np.array(X.values, copy=True)
    mask = X.mask
    observed = ~mask
    warnings: list[str] = []

    empty_rows = np.flatnonzero(~observed.any(axis=1))
    if empty_rows.size:
        raise ConfigurationError(f"rows without any observed part: {empty_rows.tolist()}")

    for r in np.flatnonzero(mask.any(axis=1)):
        r_obs = observed[r]
        # Расстояния до всех строк на общей подкомпозиции; считаются один раз
        # на строку-реципиента и переиспользуются для всех её пропусков.
        dist = np.full(X.n, np.inf)
        scale = np.full(X.n, np.nan)
        shared = np.zeros(X.n, dtype=int)
        for i in range(X.n):
            if i == r:
                continue
            common = r_obs & observed[i]
            if not common.any():
                continue
            a = X.values[r, common]
            b = X.values[i, common]
            dist[i] = _subcomposition_distance(a, b)
            shared[i] = int(common.sum())
            scale[i] = a.sum() / b.sum()

        for j in np.flatnonzero(mask[r]):
            donors = np.flatnonzero(observed[:, j] & np.isfinite(dist))
            if donors.size == 0:
                limit = d.require(j, X.columns[j]) if d is not None else None
                if limit is None:
                    raise ConfigurationError(f"no donors and no detection limit for column {X.columns[j]}")
                values[r, j] = DL65_FRACTION * limit
                msg = f"aknn: no donor with {X.columns[j]} observed for row {int(r)}; used 65% of DL"
                logger.warning(msg)
                warnings.append(msg)
                continue
            # Донор с одной общей частью всегда на расстоянии 0, поэтому идёт после
            # доноров с общей подкомпозицией из 2+ частей. Дальше: расстояние,
            # больше общих частей, меньший индекс строки.
            order = np.lexsort((donors, -shared[donors], dist[donors], shared[donors] < 2))
            nearest = donors[order[:k]]
            fill = float(np.median(X.values[nearest, j] * scale[nearest]))
            if clamp and d is not None and d.has(j):
                fill = min(fill, AKNN_CLAMP_FRACTION * float(d.d[j]))
            values[r, j] = fill
    return values, warnings


def init_aknn(X: CompositionMatrix, d: DetectionLimits, k: int = 5) -> CompositionMatrix:
    values, _ = aknn_fill(X, d, k, clamp=True)
    return X.with_values(values)


def dl65_fill(X: CompositionMatrix, d: DetectionLimits) -> np.ndarray:
    values = np.array(X.values, copy=True)
    for j in X.masked_columns():
        limit = d.require(j, X.columns[j])
        values[X.mask[:, j], j] = DL65_FRACTION * limit
    return values


def init_dl65(X: CompositionMatrix, d: DetectionLimits) -> CompositionMatrix:
    return X.with_values(dl65_fill(X, d))


def uniform_dl_fill(X: CompositionMatrix, d: DetectionLimits, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    values = np.array(X.values, copy=True)
    # Нижняя граница сдвинута на минимальный положительный double: открытый интервал (0, d_j).
    low = np.nextafter(0.0, 1.0)
    for j in X.masked_columns():
        limit = d.require(j, X.columns[j])
        rows = X.mask[:, j]
        values[rows, j] = rng.uniform(low, limit, size=int(rows.sum()))
    return values


def init_uniform_dl(X: CompositionMatrix, d: DetectionLimits, seed: int = 0) -> CompositionMatrix:
    return X.with_values(uniform_dl_fill(X, d, seed))


def initialize(
    X: CompositionMatrix, d: DetectionLimits, cfg: InitConfig
) -> tuple[CompositionMatrix, list[str]]:
    """Диспетчер по ``cfg.method``; возвращает (матрицу, warnings)."""
    if X.m == 0:
        return X, []
    if cfg.method == "aknn":
        if cfg.k > X.n - 1:
            raise ConfigurationError(f"k={cfg.k} must be <= n-1={X.n - 1}")
        values, warnings = aknn_fill(X, d, cfg.k, clamp=True)
        return X.with_values(values), warnings
    if cfg.method == "dl65":
        return init_dl65(X, d), []
    if cfg.method == "uniform_dl":
        return init_uniform_dl(X, d, cfg.rng_seed), []
    raise ConfigurationError(f"unknown init method {cfg.method!r}")
