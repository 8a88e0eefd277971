"""Критерии качества импутации: RDCM, CED и «странные» импутации.

Граница для странных импутаций: значение ровно d_j допустимо (туда попадает
отсечка), значение ровно 0 — нет.
"""

from __future__ import annotations

import numpy as np

from app.core.errors import DegenerateDataError, MetricsError, ShapeError
from app.schemas.composition import CompositionMatrix, DetectionLimits
from app.schemas.reports import CuriousCount, MetricsReport, VariableMetrics
from app.services.coda import aitchison_pdist, aitchison_rowwise, pivot_forward

# Опорная переменная для координат RDCM фиксирована ради воспроизводимости.
RDCM_PIVOT = 0


def _values(X: CompositionMatrix | np.ndarray) -> np.ndarray:
    if isinstance(X, CompositionMatrix):
        return np.asarray(X.values)
    return np.asarray(X, dtype=np.float64)


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def rdcm_from_covariances(S: np.ndarray, S_star: np.ndarray, *, normalized: bool = True) -> float:
    """(1/(D−1))·‖S − S*‖_F / ‖S‖_F; без нормировки — (1/(D−1))·‖S − S*‖_F."""
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    S_star = np.atleast_2d(np.asarray(S_star, dtype=np.float64))
    _same_shape(S, S_star)
    p = S.shape[0]  # = D − 1
    diff = float(np.linalg.norm(S - S_star, ord="fro")) / p
    if not normalized:
        return diff
    norm = float(np.linalg.norm(S, ord="fro"))
    if norm == 0:
        raise DegenerateDataError("covariance of the original data is zero")
    return diff / norm


def rdcm(X_true: CompositionMatrix | np.ndarray, X_imp: np.ndarray, *, normalized: bool = True) -> float:
    """Относительная разница ковариационных матриц в pivot-координатах."""
    a = _values(X_true)
    b = np.asarray(X_imp, dtype=np.float64)
    _same_shape(a, b)
    if a.shape[0] < 2:
        raise MetricsError("covariance is undefined for fewer than 2 rows")
    za = pivot_forward(a, RDCM_PIVOT).z
    zb = pivot_forward(b, RDCM_PIVOT).z
    S = np.cov(za, rowvar=False, ddof=1)
    S_star = np.cov(zb, rowvar=False, ddof=1)
    return rdcm_from_covariances(S, S_star, normalized=normalized)


def ced(X_true: CompositionMatrix | np.ndarray, X_imp: np.ndarray, mask: np.ndarray) -> float:
    """Средняя d_A между истинными и импутированными строками с нулями,
    нормированная на максимальное попарное d_A исходных данных."""
    a = _values(X_true)
    b = np.asarray(X_imp, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    _same_shape(a, b)
    _same_shape(a, mask)
    rows = mask.any(axis=1)
    if not rows.any():
        raise MetricsError("CED needs at least one row with a rounded zero")
    numerator = float(aitchison_rowwise(a[rows], b[rows]).mean())
    denominator = float(aitchison_pdist(a).max()) if a.shape[0] > 1 else 0.0
    if denominator == 0:
        raise DegenerateDataError("all original rows are proportional; maximum Aitchison distance is 0")
    return numerator / denominator


def curious_count(X_imp: np.ndarray, mask: np.ndarray, d: DetectionLimits) -> tuple[int, int]:
    """(выше предела, ≤ 0) среди маскированных ячеек."""
    X_imp = np.asarray(X_imp, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    _same_shape(X_imp, mask)
    limits = np.broadcast_to(d.d, X_imp.shape)
    above = mask & ~np.isnan(limits) & (X_imp > np.nan_to_num(limits, nan=np.inf))
    nonpositive = mask & (X_imp <= 0)
    return int(above.sum()), int(nonpositive.sum())


def evaluate(
    X_true: CompositionMatrix | np.ndarray,
    X_imp: np.ndarray,
    mask: np.ndarray,
    d: DetectionLimits,
    *,
    columns: tuple[str, ...] | None = None,
    normalized_rdcm: bool = True,
) -> MetricsReport:
    """Все критерии сразу + разбивка по переменным.

    RDCM/CED требуют положительных значений; при странных неположительных
    импутациях они не определены и в отчёт попадают как None.
    """
    a = _values(X_true)
    b = np.asarray(X_imp, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    _same_shape(a, b)
    names = columns or (X_true.columns if isinstance(X_true, CompositionMatrix) else tuple(f"V{j + 1}" for j in range(a.shape[1])))

    above, nonpos = curious_count(b, mask, d)
    m = int(mask.sum())
    positive = bool((b > 0).all())

    rdcm_value = rdcm(a, b, normalized=normalized_rdcm) if positive else None
    ced_value = ced(a, b, mask) if positive and mask.any() else None

    per_variable: list[VariableMetrics] = []
    for j, name in enumerate(names):
        col = mask[:, j]
        if not col.any():
            per_variable.append(VariableMetrics(variable=name, masked=0, curious_above_dl=0, curious_nonpositive=0))
            continue
        imp = b[col, j]
        limit = d.d[j]
        err = float(np.mean(np.abs(np.log(imp / a[col, j])))) if (imp > 0).all() else None
        per_variable.append(
            VariableMetrics(
                variable=name,
                masked=int(col.sum()),
                curious_above_dl=int((imp > limit).sum()) if not np.isnan(limit) else 0,
                curious_nonpositive=int((imp <= 0).sum()),
                mean_abs_log_error=err,
            )
        )

    return MetricsReport(
        rdcm=rdcm_value,
        ced=ced_value,
        curious_above_dl=CuriousCount(count=above, fraction=above / m if m else 0.0),
        curious_nonpositive=CuriousCount(count=nonpos, fraction=nonpos / m if m else 0.0),
        per_variable=per_variable,
    )
