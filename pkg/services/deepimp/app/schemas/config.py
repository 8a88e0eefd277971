"""Конфигурация прогонов: сеть, инициализация, импутер, бейзлайны."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

InitMethod = Literal["aknn", "dl65", "uniform_dl"]
Optimizer = Literal["adam", "sgd"]
Algorithm = Literal["raw", "pivot"]
ConvergenceStat = Literal["mean_abs", "squared_relative"]
VariableOrder = Literal["fewest_missing_first", "column_order"]
# "paper" — синоним "full".
NetProfile = Literal["desk", "full", "paper"]
BaselineName = Literal["knn_euclidean", "knn_aitchison", "dl65", "uniform_dl"]

# 1000, 900, …, 100 — 10 скрытых слоёв.
FULL_LAYERS: tuple[int, ...] = tuple(range(1000, 0, -100))
DESK_LAYERS: tuple[int, ...] = (64, 48, 32)


class AdamParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    lr: float = Field(default=0.001, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)


class NetworkConfig(BaseModel):
    """Параметры сети и цикла обучения. Значения по умолчанию — полный профиль."""

    model_config = ConfigDict(frozen=True)

    layer_sizes: tuple[int, ...] = FULL_LAYERS
    epochs: int = Field(default=300, ge=1)
    patience: int = Field(default=25, ge=1)
    dropout_rate: float = Field(default=0.1, ge=0, lt=1)
    validation_fraction: float = Field(default=0.2, gt=0, lt=1)
    optimizer: Optimizer = "adam"
    adam_params: AdamParams = AdamParams()
    sgd_lr: float = Field(default=0.01, gt=0)
    loss: Literal["mse"] = "mse"
    metric: Literal["mae"] = "mae"
    batch_size: int = Field(default=32, ge=1)
    rng_seed: int = Field(default=0, ge=0)

    @field_validator("layer_sizes")
    @classmethod
    def validate_layer_sizes(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if any(w < 1 for w in v):
            raise ValueError("layer widths must be positive")
        return tuple(v)

    @classmethod
    def full(cls, **overrides) -> NetworkConfig:
        return cls(**overrides)

    @classmethod
    def desk(cls, **overrides) -> NetworkConfig:
        params = {"layer_sizes": DESK_LAYERS, "epochs": 150}
        params.update(overrides)
        return cls(**params)

    @classmethod
    def for_profile(cls, profile: NetProfile, **overrides) -> NetworkConfig:
        return cls.desk(**overrides) if profile == "desk" else cls.full(**overrides)

    def n_parameters(self, n_inputs: int) -> int:
        widths = (n_inputs, *self.layer_sizes, 1)
        return sum(a * b + b for a, b in zip(widths[:-1], widths[1:]))


class InitConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    method: InitMethod = "aknn"
    k: int = Field(default=5, ge=1)
    rng_seed: int = Field(default=0, ge=0)


class ImputerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    algorithm: Algorithm = "pivot"
    eps: float = Field(default=1.0, ge=0)
    maxiter: int = Field(default=10, ge=1)
    net: NetworkConfig = NetworkConfig()
    init: InitConfig = InitConfig()
    censor: bool = True
    convergence: ConvergenceStat = "mean_abs"
    order: VariableOrder = "fewest_missing_first"
    warm_start: bool = False
    # Меньше наблюдений в столбце — сеть не обучается, остаётся инициализация.
    min_observed: int = Field(default=5, ge=2)
    # Нижняя граница для неположительных прогнозов (доля предела обнаружения).
    floor_fraction: float = Field(default=0.001, gt=0, lt=1)


class BaselineKind(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: BaselineName
    k: int = Field(default=5, ge=1)
    seed: int = Field(default=0, ge=0)


class MethodOptions(BaseModel):
    """Переопределения для методов из таблицы (CLI-флаги и bench-конфиг).

    None — оставить значение метода/профиля по умолчанию.
    """

    model_config = ConfigDict(frozen=True)

    k: int | None = Field(default=None, ge=1)
    eps: float | None = Field(default=None, ge=0)
    maxiter: int | None = Field(default=None, ge=1)
    epochs: int | None = Field(default=None, ge=1)
    patience: int | None = Field(default=None, ge=1)
    dropout: float | None = Field(default=None, ge=0, lt=1)
    net_profile: NetProfile | None = None
    layer_sizes: tuple[int, ...] | None = None
    censor: bool | None = None
    convergence: ConvergenceStat | None = None

    @model_validator(mode="after")
    def _check_layers(self) -> MethodOptions:
        if self.layer_sizes is not None and any(w < 1 for w in self.layer_sizes):
            raise ValueError("layer_sizes must be positive")
        return self
