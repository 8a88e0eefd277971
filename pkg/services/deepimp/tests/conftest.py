"""Тестовая инфраструктура.

Все данные синтетические и детерминированные (фиксированные сиды), сети —
маленькие, чтобы набор проходил за минуты. Длинные прогоны на полном
синтетическом наборе помечены ``@pytest.mark.slow``.

Хелперы ниже импортируются тестами напрямую (``from .conftest import ...``).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from app.schemas.composition import CompositionMatrix, DetectionLimits
from app.schemas.config import ImputerConfig, InitConfig, NetworkConfig
from app.schemas.experiment import SyntheticSpec
from app.services.synthetic import CensoredData, apply_artificial_dl, generate_synthetic


def tiny_net(**overrides) -> NetworkConfig:
    """Сеть на несколько сотен параметров: быстро и достаточно для тестов."""
    params = {
        "layer_sizes": (16, 8),
        "epochs": 80,
        "patience": 15,
        "dropout_rate": 0.0,
        "batch_size": 16,
        "rng_seed": 0,
    }
    params.update(overrides)
    return NetworkConfig(**params)


def imputer_config(algorithm: str = "pivot", **overrides) -> ImputerConfig:
    params = {
        "algorithm": algorithm,
        "net": tiny_net(),
        "init": InitConfig(method="aknn", k=3),
        "maxiter": 3,
        "eps": 1e-3,
    }
    params.update(overrides)
    return ImputerConfig(**params)


def matrix(rows, mask=None, columns=()) -> CompositionMatrix:
    values = np.asarray(rows, dtype=np.float64)
    if mask is None:
        return CompositionMatrix.from_raw(values, columns)
    return CompositionMatrix(values, np.asarray(mask, dtype=bool), tuple(columns))


def limits(*values) -> DetectionLimits:
    return DetectionLimits.from_values(list(values))


def censored_synthetic(n: int = 80, D: int = 5, q: float = 0.05, seed: int = 3, **spec) -> CensoredData:
    X = generate_synthetic(SyntheticSpec(n=n, D=D, seed=seed, **spec))
    return apply_artificial_dl(X, q)


def loglinear_censored(n: int = 120, seed: int = 11) -> CensoredData:
    """Части связаны точным лог-линейным соотношением (один фактор, без шума)."""
    return censored_synthetic(n=n, D=4, q=0.05, seed=seed, factors=1, noise_scale=0.0, loading_scale=0.6)


def write_csv(path: Path, values, columns) -> Path:
    pd.DataFrame(np.asarray(values, dtype=np.float64), columns=list(columns)).to_csv(
        path, index=False, float_format="%.17g"
    )
    return path


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def small_censored() -> CensoredData:
    return censored_synthetic()
