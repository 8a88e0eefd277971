"""Чтение/запись CSV.

Вход: строка заголовка с именами переменных, дальше числа. 0 — округлённый
ноль (ниже предела обнаружения); отрицательные, пустые и нечисловые ячейки
отклоняются с указанием строки (1 — первая строка данных) и столбца.
Входные файлы только читаются.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from app.core.config import settings
from app.core.errors import CsvFormatError, ShapeError
from app.schemas.composition import CompositionMatrix, DetectionLimits

logger = logging.getLogger(__name__)

_TRUE = {"1", "true", "yes"}
_FALSE = {"0", "false", "no"}


def _read_raw(path: str | Path) -> pd.DataFrame:
    """Все ячейки как строки; заголовок читается отдельной строкой без переименования дублей."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"file not found: {path}")
    try:
        raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as exc:
        raise CsvFormatError(f"{path.name}: file is empty") from exc
    except pd.errors.ParserError as exc:
        raise CsvFormatError(f"{path.name}: {exc}") from exc
    header = [str(c).strip() for c in raw.iloc[0]]
    duplicates = sorted({c for c in header if header.count(c) > 1})
    if duplicates:
        raise CsvFormatError(f"{path.name}: duplicate column names {duplicates}")
    df = raw.iloc[1:].reset_index(drop=True).fillna("")
    df.columns = header
    return df


def _parse_column(raw: pd.Series, name: str, *, allow_zero: bool) -> np.ndarray:
    # float() на каждой ячейке: %.17g читается обратно бит в бит.
    out = np.empty(len(raw), dtype=np.float64)
    for i, cell in enumerate(raw):
        try:
            value = float(cell)
        except (TypeError, ValueError):
            value = np.nan
        if not np.isfinite(value):
            raise CsvFormatError(f"not a finite number: {cell!r}", row=i + 1, column=name)
        if value < 0 or (value == 0 and not allow_zero):
            what = "negative value" if value < 0 else "non-positive value"
            raise CsvFormatError(f"{what} {value!r}", row=i + 1, column=name)
        out[i] = value
    return out


def _numeric(df: pd.DataFrame, *, allow_zero: bool = True) -> np.ndarray:
    out = np.empty(df.shape, dtype=np.float64)
    for j, name in enumerate(df.columns):
        out[:, j] = _parse_column(df[name], name, allow_zero=allow_zero)
    return out


def read_matrix(path: str | Path) -> tuple[np.ndarray, tuple[str, ...]]:
    """Числовая матрица + имена столбцов; нули разрешены."""
    df = _read_raw(path)
    if df.shape[0] == 0:
        raise CsvFormatError(f"{Path(path).name}: no data rows")
    return _numeric(df), tuple(df.columns)


def read_composition(path: str | Path) -> CompositionMatrix:
    """CSV → CompositionMatrix; нули становятся маской округлённых нулей."""
    values, columns = read_matrix(path)
    if values.shape[1] < 2:
        raise CsvFormatError(f"{Path(path).name}: need at least 2 columns, got {values.shape[1]}")
    X = CompositionMatrix.from_raw(values, columns)
    logger.info("read %s: n=%d, D=%d, rounded zeros=%d", Path(path).name, X.n, X.D, X.m)
    return X


def read_detection_limits(path: str | Path, columns: tuple[str, ...]) -> DetectionLimits:
    """Одна строка с тем же заголовком; пустая ячейка — предела нет.

    Лишние столбцы — ошибка; отсутствующие столбцы считаются без предела.
    """
    df = _read_raw(path)
    if df.shape[0] != 1:
        raise CsvFormatError(f"{Path(path).name}: expected exactly one row of detection limits, got {df.shape[0]}")
    unknown = [c for c in df.columns if c not in columns]
    if unknown:
        raise CsvFormatError(f"{Path(path).name}: unknown column", column=unknown[0])
    limits = np.full(len(columns), np.nan)
    for j, name in enumerate(columns):
        if name not in df.columns:
            continue
        cell = df[name].iloc[0].strip()
        if cell == "":
            continue
        try:
            value = float(cell)
        except ValueError as exc:
            raise CsvFormatError(f"not a number: {cell!r}", row=1, column=name) from exc
        if not (np.isfinite(value) and value > 0):
            raise CsvFormatError(f"detection limit must be positive, got {cell!r}", row=1, column=name)
        limits[j] = value
    return DetectionLimits(limits)


def read_mask(path: str | Path, shape: tuple[int, int]) -> np.ndarray:
    """Маска из CSV: 1/0 или true/false."""
    df = _read_raw(path)
    if df.shape != shape:
        raise ShapeError(f"mask shape {df.shape} != data shape {shape}")
    mask = np.zeros(shape, dtype=bool)
    for j, name in enumerate(df.columns):
        for i, cell in enumerate(df[name]):
            token = str(cell).strip().lower()
            if token in _TRUE:
                mask[i, j] = True
            elif token not in _FALSE:
                raise CsvFormatError(f"mask cell must be 0/1, got {cell!r}", row=i + 1, column=name)
    return mask


def write_matrix(path: str | Path, values: np.ndarray, columns: tuple[str, ...]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(np.asarray(values), columns=list(columns)).to_csv(
        path, index=False, float_format=settings.float_format
    )
    return path


def write_detection_limits(path: str | Path, limits: DetectionLimits, columns: tuple[str, ...]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame([limits.d], columns=list(columns)).to_csv(
        path, index=False, float_format=settings.float_format, na_rep=""
    )
    return path
