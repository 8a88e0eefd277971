"""Геометрия симплекса: замыкание, pivot-координаты и обратное преобразование,
подгонка абсолютных значений, расстояние Эйтчисона, предел обнаружения в
координатах.

Всё считается в double. Геометрические средние — через среднее логарифмов.

Pivot-координаты строк x (после перестановки столбцов, где опорная часть
стоит первой):

    z_j = sqrt((D−j)/(D−j+1)) · ln( x_j / gmean(x_{j+1}, …, x_D) ),  j = 1…D−1

Это разложение clr(x) по ортонормированному базису V (D×(D−1)): z = ln(x)·V
(столбцы V в сумме дают 0, поэтому центрирование не нужно), x ∝ exp(z·Vᵀ).
Обратная формула по строкам:

    x_1 = exp( sqrt((D−1)/D) · z_1 )
    x_j = exp( −Σ_{k<j} z_k / sqrt((D−k+1)(D−k)) + sqrt((D−j)/(D−j+1)) · z_j )
    x_D = exp( −Σ_{k<D} z_k / sqrt((D−k+1)(D−k)) )

Константа при x_1 — частный случай общей строки (сумма пустая); проверено
численно против прямого преобразования, поправок не требуется.
"""

from __future__ import annotations

import logging
from functools import lru_cache

import numpy as np
from scipy.spatial.distance import pdist

from app.core.errors import CodaDomainError, ShapeError
from app.schemas.composition import CompositionMatrix, CoordDetectionLimit, PivotCoordinates

logger = logging.getLogger(__name__)


def _check_positive(a: np.ndarray, what: str) -> None:
    bad = ~(np.isfinite(a) & (a > 0))
    if bad.any():
        idx = np.argwhere(bad)[0]
        if a.ndim == 2:
            raise CodaDomainError(f"{what}: non-positive or non-finite part", row=int(idx[0]), column=int(idx[1]))
        raise CodaDomainError(f"{what}: non-positive or non-finite part", column=int(idx[0]))


def _values(X: CompositionMatrix | np.ndarray) -> np.ndarray:
    if isinstance(X, CompositionMatrix):
        return np.asarray(X.values)
    return np.asarray(X, dtype=np.float64)


def closure(x: np.ndarray, kappa: float = 1.0) -> np.ndarray:
    """Масштабирует вектор (или каждую строку матрицы) к сумме ``kappa``."""
    x = np.asarray(x, dtype=np.float64)
    if not kappa > 0:
        raise CodaDomainError(f"kappa must be positive, got {kappa}")
    _check_positive(x, "closure")
    return kappa * x / x.sum(axis=-1, keepdims=True)


def clr(x: np.ndarray) -> np.ndarray:
    """Centred log-ratio; вспомогательное для расстояний."""
    logs = np.log(x)
    return logs - logs.mean(axis=-1, keepdims=True)


@lru_cache(maxsize=64)
def _pivot_basis(d: int) -> np.ndarray:
    # Столбец k (0-based): на позиции k — sqrt((D−k−1)/(D−k)),
    # ниже — −1/sqrt((D−k−1)(D−k)), выше — 0.
    V = np.zeros((d, d - 1))
    for k in range(d - 1):
        a = d - k - 1
        V[k, k] = np.sqrt(a / (a + 1))
        V[k + 1 :, k] = -1.0 / np.sqrt(a * (a + 1))
    V.setflags(write=False)
    return V


def pivot_basis(d: int) -> np.ndarray:
    if d < 2:
        raise ShapeError(f"pivot basis needs D >= 2, got {d}")
    return _pivot_basis(d)


def pivot_permutation(d: int, pivot_var: int) -> np.ndarray:
    """Опорный столбец первым, остальные в исходном порядке."""
    if not 0 <= pivot_var < d:
        raise ShapeError(f"pivot_var={pivot_var} out of range for D={d}")
    return np.array([pivot_var, *(j for j in range(d) if j != pivot_var)], dtype=np.intp)


def pivot_forward(X: CompositionMatrix | np.ndarray, pivot_var: int = 0) -> PivotCoordinates:
    """Переставляет ``pivot_var`` в начало и считает pivot-координаты."""
    values = np.atleast_2d(_values(X))
    if isinstance(X, CompositionMatrix) and not X.is_initialized:
        r, c = np.argwhere(X.values <= 0)[0]
        raise CodaDomainError("matrix is not initialized: rounded zero still 0", row=int(r), column=int(c))
    _check_positive(values, "pivot_forward")
    d = values.shape[1]
    perm = pivot_permutation(d, pivot_var)
    permuted = values[:, perm]
    z = np.log(permuted) @ pivot_basis(d)
    return PivotCoordinates(z=z, pivot=pivot_var, perm=perm, row_totals=permuted.sum(axis=1))


def pivot_inverse(Z: PivotCoordinates) -> np.ndarray:
    """Обратное pivot-преобразование с возвратом исходного порядка столбцов.

    Результат — композиция с точностью до положительного множителя на строку
    (геометрическое среднее каждой строки равно 1).
    """
    z = np.asarray(Z.z)
    bad = ~np.isfinite(z)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise CodaDomainError("non-finite pivot coordinate", row=int(r), column=int(c))
    permuted = np.exp(z @ pivot_basis(Z.D).T)
    out = np.empty_like(permuted)
    out[:, Z.perm] = permuted
    return out


def rescale_to_totals(X_new: np.ndarray, totals: np.ndarray) -> np.ndarray:
    """Масштабирует каждую строку к заданной сумме (восстановление масштаба после inverse)."""
    X_new = np.asarray(X_new, dtype=np.float64)
    return X_new * (np.asarray(totals) / X_new.sum(axis=1))[:, None]


def readjust_absolute(
    X_new: np.ndarray,
    X_ref: CompositionMatrix,
    *,
    fallback_totals: np.ndarray | None = None,
) -> np.ndarray:
    """Возвращает абсолютный масштаб строкам после обратного преобразования.

    Каждая строка умножается на один положительный множитель так, чтобы сумма
    её наблюдённых (немаскированных) ячеек совпала с той же суммой в ``X_ref``;
    затем наблюдённые ячейки перезаписываются исходными значениями точно.
    Строка, где замаскировано всё, масштабируется к ``fallback_totals`` (или
    оставляется как есть) и попадает в warning.
    """
    X_new = np.asarray(X_new, dtype=np.float64)
    if X_new.shape != X_ref.values.shape:
        raise ShapeError(f"X_new shape {X_new.shape} != reference shape {X_ref.values.shape}")
    _check_positive(X_new, "readjust_absolute")

    observed = ~X_ref.mask
    ref_sums = np.where(observed, X_ref.values, 0.0).sum(axis=1)
    new_sums = np.where(observed, X_new, 0.0).sum(axis=1)

    all_masked = ~observed.any(axis=1)
    factor = np.ones(X_new.shape[0])
    ok = ~all_masked
    factor[ok] = ref_sums[ok] / new_sums[ok]
    out = X_new * factor[:, None]
    if all_masked.any():
        rows = np.flatnonzero(all_masked).tolist()
        logger.warning("readjust_absolute: rows without observed parts %s, rescaled to row totals", rows)
        if fallback_totals is not None:
            totals = np.asarray(fallback_totals, dtype=np.float64)
            out[all_masked] = rescale_to_totals(X_new[all_masked], totals[all_masked])

    return np.where(observed, X_ref.values, out)


def aitchison_distance(x: np.ndarray, y: np.ndarray) -> float:
    """Расстояние Эйтчисона.

    d_A(x, y)² = (1/D) Σ_{i<j} (ln(x_i/x_j) − ln(y_i/y_j))² = ‖clr(x) − clr(y)‖².
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError(f"vectors of equal length expected, got {x.shape} and {y.shape}")
    _check_positive(x, "aitchison_distance")
    _check_positive(y, "aitchison_distance")
    return float(np.linalg.norm(clr(x) - clr(y)))


def aitchison_rowwise(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """d_A(X[i], Y[i]) для каждой строки."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape != Y.shape:
        raise ShapeError(f"shape mismatch {X.shape} vs {Y.shape}")
    _check_positive(X, "aitchison_rowwise")
    _check_positive(Y, "aitchison_rowwise")
    return np.linalg.norm(clr(X) - clr(Y), axis=1)


def aitchison_pdist(X: np.ndarray) -> np.ndarray:
    """Попарные расстояния Эйтчисона (condensed-форма scipy)."""
    X = np.asarray(X, dtype=np.float64)
    _check_positive(X, "aitchison_pdist")
    return pdist(clr(X), metric="euclidean")


def dl_to_pivot(X_row: np.ndarray, d_j: float, pivot_var: int) -> float:
    """Предел обнаружения ``d_j`` опорной части в первой pivot-координате.

    φ = sqrt((D−1)/D) · ln( d_j / gmean(остальные D−1 частей строки) ) —
    то значение z_1, которое получилось бы при x_pivot = d_j.
    """
    X_row = np.asarray(X_row, dtype=np.float64)
    return float(dl_to_pivot_rows(X_row[None, :], d_j, pivot_var).phi[0])


def dl_to_pivot_rows(X: np.ndarray, d_j: float, pivot_var: int) -> CoordDetectionLimit:
    """Векторная версия ``dl_to_pivot`` для всех строк сразу."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    d = X.shape[1]
    if not 0 <= pivot_var < d:
        raise ShapeError(f"pivot_var={pivot_var} out of range for D={d}")
    if not (np.isfinite(d_j) and d_j > 0):
        raise CodaDomainError(f"detection limit must be positive, got {d_j}", column=pivot_var)
    others = np.delete(X, pivot_var, axis=1)
    _check_positive(others, "dl_to_pivot")
    log_gmean = np.log(others).mean(axis=1)
    phi = np.sqrt((d - 1) / d) * (np.log(d_j) - log_gmean)
    return CoordDetectionLimit(phi=phi)
