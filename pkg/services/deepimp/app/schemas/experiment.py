"""Конфигурация и отчёт бенчмарка.

Формат отчёта (JSON, ``ExperimentReport``)::

    {
      "n": 300, "D": 10, "masked_cells": 150,
      "detection_limits": {"V1": 0.012, ...},
      "results": [
        {"label": "dl65", "method": "dl65", "seed": 1, "tags": ["non-CoDa", "DL"], "status": "ok",
         "wall_time": 0.002, "metrics": {...MetricsReport...}, "run": {...RunReport...}},
        ...
      ],
      "summary": [{"label": "dl65", "method": "dl65", "runs": 3, "failures": 0, "median_ced": ..., ...}]
    }

Длинная таблица (CSV): ``label, method, seed, metric, value``.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.schemas.config import MethodOptions
from app.schemas.reports import MetricsReport, RunReport


class SyntheticSpec(BaseModel):
    """Лог-нормальная факторная модель: X = exp(F·L + μ + шум)."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(default=300, ge=2)
    D: int = Field(default=10, ge=2)  # noqa: N815
    factors: int = Field(default=2, ge=1)
    loading_scale: float = Field(default=1.0, ge=0)
    noise_scale: float = Field(default=0.5, ge=0)
    # Сдвиг лог-среднего по столбцам, чтобы части имели разный масштаб.
    log_mean_spread: float = Field(default=1.0, ge=0)
    seed: int = Field(default=0, ge=0)
    # None — абсолютные значения; число — замыкание строк к этой сумме.
    close_to: float | None = Field(default=None, gt=0)

    @classmethod
    def high_correlation(cls, **overrides) -> SyntheticSpec:
        """Один фактор, шум 0.1: части сильно связаны."""
        params = {"factors": 1, "noise_scale": 0.1}
        params.update(overrides)
        return cls(**params)


class MethodSpec(BaseModel):
    """Метод в эксперименте. ``label`` различает один метод с разными опциями."""

    model_config = ConfigDict(frozen=True)

    name: str
    label: str = Field(min_length=1)
    options: MethodOptions = MethodOptions()

    @model_validator(mode="before")
    @classmethod
    def _label_defaults_to_name(cls, data: object) -> object:
        if isinstance(data, dict) and not data.get("label"):
            data = {**data, "label": data.get("name")}
        return data


class ExperimentConfig(BaseModel):
    """Эксперимент: источник данных, цензурирование, методы × сиды, куда писать."""

    model_config = ConfigDict(frozen=True)

    synthetic: SyntheticSpec | None = None
    csv_path: Path | None = None
    censor_quantile: float = Field(default=0.05, gt=0, lt=1)
    methods: list[MethodSpec] = Field(min_length=1)
    seeds: list[int] = Field(default_factory=lambda: [1, 2, 3], min_length=1)
    output: Path | None = None
    workers: int | None = Field(default=None, ge=1)

    @field_validator("seeds")
    @classmethod
    def validate_seeds(cls, v: list[int]) -> list[int]:
        if any(s < 0 for s in v):
            raise ValueError("seeds must be non-negative")
        if len(set(v)) != len(v):
            raise ValueError("seeds must be unique")
        return v

    @field_validator("methods")
    @classmethod
    def validate_labels(cls, v: list[MethodSpec]) -> list[MethodSpec]:
        labels = [m.label for m in v]
        duplicates = sorted({label for label in labels if labels.count(label) > 1})
        if duplicates:
            raise ValueError(f"method labels must be unique, repeated: {duplicates}")
        return v

    @model_validator(mode="after")
    def _one_source(self) -> ExperimentConfig:
        if (self.synthetic is None) == (self.csv_path is None):
            raise ValueError("exactly one of 'synthetic' and 'csv_path' must be set")
        return self


class RunResult(BaseModel):
    label: str
    # Фактически запущенный метод: censor=False превращает deepImp-dl в deepImp.
    method: str
    seed: int
    tags: list[str]
    status: Literal["ok", "failed"]
    wall_time: float = Field(ge=0)
    error: str | None = None
    metrics: MetricsReport | None = None
    run: RunReport | None = None


class MethodSummary(BaseModel):
    label: str
    method: str
    tags: list[str]
    runs: int
    failures: int
    median_rdcm: float | None = None
    median_ced: float | None = None
    median_curious_above_dl: float | None = None
    median_curious_nonpositive: float | None = None
    median_wall_time: float | None = None


class ExperimentReport(BaseModel):
    n: int
    D: int  # noqa: N815
    masked_cells: int
    detection_limits: dict[str, float | None]
    results: list[RunResult]
    summary: list[MethodSummary]
    warnings: list[str] = Field(default_factory=list)

    def summary_for(self, label: str) -> MethodSummary:
        for s in self.summary:
            if s.label == label:
                return s
        raise KeyError(label)
