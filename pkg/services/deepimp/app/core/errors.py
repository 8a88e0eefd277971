"""Иерархия исключений.

Все доменные ошибки наследуют ``DeepImpError`` и одновременно подходящий
builtin (``ValueError``/``RuntimeError``), чтобы вызывающий код мог ловить их
и обычным способом. CLI отображает их в коды выхода: ``ImputationError`` → 1,
остальные ``DeepImpError`` → 2.
"""

from __future__ import annotations


class DeepImpError(Exception):
    """Базовое исключение пакета."""


class CodaDomainError(DeepImpError, ValueError):
    """Значение вне области определения log-ratio геометрии (≤ 0, NaN, inf)."""

    def __init__(self, message: str, *, row: int | None = None, column: int | None = None) -> None:
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row={row}")
        if column is not None:
            where.append(f"column={column}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ConfigurationError(DeepImpError, ValueError):
    """Несогласованная конфигурация: нет предела обнаружения, неизвестный метод и т.п."""


class ShapeError(DeepImpError, ValueError):
    """Размерности массивов не совпадают."""


class InsufficientDataError(DeepImpError, ValueError):
    """Слишком мало наблюдений для обучения/оценки."""


class DegenerateDataError(DeepImpError, ValueError):
    """Данные вырождены: константный столбец, все строки пропорциональны и т.п."""


class MetricsError(DeepImpError, ValueError):
    """Критерий качества не определён на переданных данных."""


class CsvFormatError(DeepImpError, ValueError):
    """Битый входной CSV; сообщение указывает строку/столбец."""

    def __init__(self, message: str, *, row: int | None = None, column: str | None = None) -> None:
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{message} at {', '.join(where)}" if where else message)


class ImputationError(DeepImpError, RuntimeError):
    """Прогон импутации прерван (например, нечисловые координаты после обратного преобразования)."""
