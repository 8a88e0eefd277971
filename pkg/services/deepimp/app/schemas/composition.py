"""Контейнеры данных композиционной матрицы.

Здесь живут только массивы + их инварианты. Валидация делается один раз при
создании, массивы копируются и помечаются read-only, так что объект можно
безопасно передавать между потоками.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from app.core.errors import CodaDomainError, ConfigurationError, ShapeError


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def default_columns(d: int) -> tuple[str, ...]:
    return tuple(f"V{j + 1}" for j in range(d))


@dataclass(frozen=True, eq=False)
class CompositionMatrix:
    """n×D матрица измерений + маска округлённых нулей (True = цензурировано).

    Немаскированные ячейки строго положительны. Маскированные в сыром виде
    равны 0, после инициализации/импутации — положительны.
    """

    values: np.ndarray
    mask: np.ndarray
    columns: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim != 2:
            raise ShapeError(f"values must be 2-D, got ndim={values.ndim}")
        if mask.shape != values.shape:
            raise ShapeError(f"mask shape {mask.shape} != values shape {values.shape}")
        n, d = values.shape
        if n < 1 or d < 2:
            raise ShapeError(f"need n >= 1 and D >= 2, got n={n}, D={d}")

        bad = ~np.isfinite(values)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise CodaDomainError("non-finite cell", row=int(r), column=int(c))
        bad = ~mask & (values <= 0)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise CodaDomainError("observed cell must be strictly positive", row=int(r), column=int(c))
        bad = mask & (values < 0)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise CodaDomainError("masked cell must not be negative", row=int(r), column=int(c))

        columns = tuple(self.columns) if self.columns else default_columns(d)
        if len(columns) != d:
            raise ShapeError(f"{len(columns)} column names for D={d}")

        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))
        object.__setattr__(self, "columns", columns)

    @classmethod
    def from_raw(cls, values: np.ndarray, columns: tuple[str, ...] | list[str] = ()) -> CompositionMatrix:
        """Нули во входе → округлённые нули (маска)."""
        values = np.asarray(values, dtype=np.float64)
        return cls(values=values, mask=values == 0, columns=tuple(columns))

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def D(self) -> int:  # noqa: N802
        return int(self.values.shape[1])

    @property
    def m(self) -> int:
        """Количество округлённых нулей."""
        return int(self.mask.sum())

    @property
    def is_initialized(self) -> bool:
        return bool((self.values > 0).all())

    def masked_columns(self) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.mask.any(axis=0))]

    def with_values(self, values: np.ndarray) -> CompositionMatrix:
        """Та же маска и имена столбцов, новые значения."""
        return CompositionMatrix(values=values, mask=self.mask, columns=self.columns)

    def raw(self) -> np.ndarray:
        """Наблюдённые значения, 0 на месте округлённых нулей."""
        return np.where(self.mask, 0.0, self.values)


@dataclass(frozen=True, eq=False)
class DetectionLimits:
    """Пределы обнаружения по переменным; NaN — «предела нет»."""

    d: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.d, dtype=np.float64)
        if d.ndim != 1:
            raise ShapeError(f"detection limits must be 1-D, got ndim={d.ndim}")
        present = ~np.isnan(d)
        if (present & ~(d > 0)).any() or np.isinf(d).any():
            j = int(np.flatnonzero(present & ~((d > 0) & np.isfinite(d)))[0])
            raise ConfigurationError(f"detection limit for column {j} must be a positive finite number")
        object.__setattr__(self, "d", _frozen(d))

    @classmethod
    def from_values(cls, values: list[float | None] | np.ndarray) -> DetectionLimits:
        return cls(np.array([np.nan if v is None else v for v in values], dtype=np.float64))

    @classmethod
    def empty(cls, d: int) -> DetectionLimits:
        return cls(np.full(d, np.nan))

    @property
    def D(self) -> int:  # noqa: N802
        return int(self.d.shape[0])

    def has(self, j: int) -> bool:
        return not np.isnan(self.d[j])

    def require(self, j: int, column: str | None = None) -> float:
        if not self.has(j):
            name = column if column is not None else f"#{j}"
            raise ConfigurationError(f"no detection limit for masked column {name}")
        return float(self.d[j])

    def validate_for(self, X: CompositionMatrix) -> None:
        """Для каждого столбца с округлёнными нулями предел обязан быть задан."""
        if self.D != X.D:
            raise ShapeError(f"{self.D} detection limits for D={X.D}")
        for j in X.masked_columns():
            self.require(j, X.columns[j])


@dataclass(frozen=True, eq=False)
class PivotCoordinates:
    """n×(D−1) pivot-координаты.

    ``perm`` — перестановка столбцов, применённая до преобразования
    (``perm[0] == pivot``); ``row_totals`` — суммы строк переставленного входа,
    нужны для подгонки абсолютных значений.
    """

    z: np.ndarray
    pivot: int
    perm: np.ndarray
    row_totals: np.ndarray

    def __post_init__(self) -> None:
        z = np.asarray(self.z, dtype=np.float64)
        perm = np.asarray(self.perm, dtype=np.intp)
        totals = np.asarray(self.row_totals, dtype=np.float64)
        if z.ndim != 2:
            raise ShapeError(f"coordinates must be 2-D, got ndim={z.ndim}")
        if perm.shape != (z.shape[1] + 1,):
            raise ShapeError(f"permutation length {perm.shape[0]} != D={z.shape[1] + 1}")
        if sorted(perm.tolist()) != list(range(perm.shape[0])) or int(perm[0]) != self.pivot:
            raise ShapeError("perm must be a permutation with the pivot first")
        if totals.shape != (z.shape[0],):
            raise ShapeError("row_totals length must equal the number of rows")
        object.__setattr__(self, "z", _frozen(z))
        object.__setattr__(self, "perm", _frozen(perm))
        object.__setattr__(self, "row_totals", _frozen(totals))

    @property
    def D(self) -> int:  # noqa: N802
        return int(self.z.shape[1] + 1)

    def with_z(self, z: np.ndarray) -> PivotCoordinates:
        return PivotCoordinates(z=z, pivot=self.pivot, perm=self.perm, row_totals=self.row_totals)


@dataclass(frozen=True, eq=False)
class CoordDetectionLimit:
    """Предел обнаружения в первой pivot-координате, по строкам."""

    phi: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "phi", _frozen(np.asarray(self.phi, dtype=np.float64)))
