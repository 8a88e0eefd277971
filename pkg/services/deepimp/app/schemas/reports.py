"""Отчёты: обучение сети, прогон импутации, критерии качества.

JSON-поля ``MetricsReport`` и ``RunReport`` фиксированы — на них завязаны
bench-отчёты и CLI.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field


class TrainReport(BaseModel):
    train_loss: list[float] = Field(default_factory=list)
    val_loss: list[float] = Field(default_factory=list)
    val_mae: list[float] = Field(default_factory=list)
    # Лосс на обучающей части до первого шага оптимизатора.
    initial_loss: float
    stopped_epoch: int = Field(ge=0)
    best_epoch: int = Field(ge=0)
    monitor: Literal["validation", "training"] = "validation"


class CellSource(IntEnum):
    """Происхождение значения ячейки в результате импутации."""

    OBSERVED = 0
    INITIALIZED = 1
    PREDICTED = 2
    CLAMPED_DL = 3
    FLOORED = 4
    FALLBACK = 5


@dataclass
class ImputationReport:
    X_imputed: np.ndarray
    iterations: int
    delta_trace: list[float]
    converged: bool
    per_variable_order: list[int]
    warnings: list[str] = field(default_factory=list)
    provenance: np.ndarray | None = None
    method: str = ""

    def to_run_report(self, columns: tuple[str, ...] | None = None) -> RunReport:
        counts: dict[str, int] = {}
        if self.provenance is not None:
            for src in CellSource:
                if src is CellSource.OBSERVED:
                    continue
                c = int((self.provenance == src).sum())
                if c:
                    counts[src.name.lower()] = c
        order = [columns[j] for j in self.per_variable_order] if columns else [str(j) for j in self.per_variable_order]
        return RunReport(
            method=self.method,
            iterations=self.iterations,
            delta_trace=list(self.delta_trace),
            converged=self.converged,
            per_variable_order=order,
            warnings=list(self.warnings),
            cell_sources=counts,
        )


class RunReport(BaseModel):
    method: str
    iterations: int
    delta_trace: list[float]
    converged: bool
    per_variable_order: list[str]
    warnings: list[str]
    cell_sources: dict[str, int] = Field(default_factory=dict)


class CuriousCount(BaseModel):
    count: int = Field(ge=0)
    fraction: float = Field(ge=0, le=1)


class VariableMetrics(BaseModel):
    variable: str
    masked: int = Field(ge=0)
    curious_above_dl: int = Field(ge=0)
    curious_nonpositive: int = Field(ge=0)
    # Среднее |ln(imputed/true)| по импутированным ячейкам (None — нет ячеек
    # или есть неположительные импутации).
    mean_abs_log_error: float | None = None


class MetricsReport(BaseModel):
    rdcm: float | None = Field(default=None, ge=0)
    ced: float | None = Field(default=None, ge=0)
    curious_above_dl: CuriousCount
    curious_nonpositive: CuriousCount
    per_variable: list[VariableMetrics] = Field(default_factory=list)
