"""Формат файла весов сети (JSON).

    {
      "format": "deepimp.network",
      "version": 1,
      "dropout_rate": 0.1,
      "x_mean": [...], "x_scale": [...],      # стандартизация признаков, длина = n_inputs
      "y_mean": 0.0, "y_scale": 1.0,          # стандартизация отклика
      "layers": [                              # от входа к выходу, последний слой — 1 нейрон
        {"n_in": 9, "n_out": 64,
         "weights": [...],                     # row-major, n_out × n_in (z = W·a + b)
         "biases": [...]},                     # n_out
        ...
      ]
    }

Числа пишутся кратчайшим repr double, поэтому загрузка восстанавливает
веса бит-в-бит. Состояние Adam не сохраняется.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, model_validator

CHECKPOINT_FORMAT = "deepimp.network"
CHECKPOINT_VERSION = 1


class LayerCheckpoint(BaseModel):
    n_in: int = Field(ge=0)
    n_out: int = Field(ge=1)
    weights: list[float]
    biases: list[float]

    @model_validator(mode="after")
    def _check_sizes(self) -> LayerCheckpoint:
        if len(self.weights) != self.n_in * self.n_out:
            raise ValueError(f"weights: expected {self.n_in * self.n_out} values, got {len(self.weights)}")
        if len(self.biases) != self.n_out:
            raise ValueError(f"biases: expected {self.n_out} values, got {len(self.biases)}")
        return self


class NetworkCheckpoint(BaseModel):
    format: Literal["deepimp.network"] = CHECKPOINT_FORMAT
    version: Literal[1] = CHECKPOINT_VERSION
    dropout_rate: float = Field(ge=0, lt=1)
    x_mean: list[float]
    x_scale: list[float]
    y_mean: float
    y_scale: float = Field(gt=0)
    layers: list[LayerCheckpoint] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_chain(self) -> NetworkCheckpoint:
        if self.layers[-1].n_out != 1:
            raise ValueError("output layer must have exactly one neuron")
        for prev, nxt in zip(self.layers[:-1], self.layers[1:]):
            if prev.n_out != nxt.n_in:
                raise ValueError(f"layer chain broken: {prev.n_out} -> {nxt.n_in}")
        n_in = self.layers[0].n_in
        if len(self.x_mean) != n_in or len(self.x_scale) != n_in:
            raise ValueError("x_mean/x_scale length must equal the input width")
        return self
