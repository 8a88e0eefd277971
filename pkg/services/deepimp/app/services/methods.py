"""Реестр методов по именам из сравнительной таблицы.

Имя → категории (CoDa / не CoDa, учитывает DL / нет) и сборка конфигурации
из ``MethodOptions`` + сида. Всё, что запускают CLI и bench, проходит здесь.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

from app.core.config import settings
from app.core.errors import ConfigurationError
from app.schemas.composition import CompositionMatrix, DetectionLimits
from app.schemas.config import (
    BaselineKind,
    ImputerConfig,
    InitConfig,
    MethodOptions,
    NetworkConfig,
)
from app.schemas.reports import ImputationReport
from app.services.baselines import impute_baseline
from app.services.imputer import impute

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MethodInfo:
    name: str
    coda: bool
    detection_limit: bool
    # None — бейзлайн; иначе алгоритм EM-импутера.
    algorithm: str | None = None
    baseline: str | None = None

    @property
    def tags(self) -> list[str]:
        return ["CoDa" if self.coda else "non-CoDa", "DL" if self.detection_limit else "non-DL"]

    @property
    def is_network(self) -> bool:
        return self.algorithm is not None


METHODS: dict[str, MethodInfo] = {
    m.name: m
    for m in (
        MethodInfo("deepImp", coda=False, detection_limit=False, algorithm="raw"),
        MethodInfo("deepImp-dl", coda=False, detection_limit=True, algorithm="raw"),
        MethodInfo("deepImpCoDa", coda=True, detection_limit=False, algorithm="pivot"),
        MethodInfo("deepImpCoDa-dl", coda=True, detection_limit=True, algorithm="pivot"),
        MethodInfo("knn", coda=False, detection_limit=False, baseline="knn_euclidean"),
        MethodInfo("aknn", coda=True, detection_limit=False, baseline="knn_aitchison"),
        MethodInfo("dl65", coda=False, detection_limit=True, baseline="dl65"),
        MethodInfo("uniform-dl", coda=False, detection_limit=True, baseline="uniform_dl"),
    )
}


def method_names() -> list[str]:
    return list(METHODS)


def get_method(name: str) -> MethodInfo:
    info = METHODS.get(name)
    if info is None:
        raise ConfigurationError(f"unknown method {name!r}; valid names: {', '.join(METHODS)}")
    return info


def resolve_censor(info: MethodInfo, options: MethodOptions) -> MethodInfo:
    """``censor=False`` переводит ``*-dl`` сеть в вариант без отсечки."""
    if not info.is_network or options.censor is None or options.censor == info.detection_limit:
        return info
    base = info.name.removesuffix("-dl")
    return METHODS[f"{base}-dl" if options.censor else base]


def build_imputer_config(info: MethodInfo, options: MethodOptions, seed: int) -> ImputerConfig:
    if not info.is_network:
        raise ConfigurationError(f"{info.name} is not a network method")
    overrides: dict[str, object] = {"rng_seed": seed}
    if options.epochs is not None:
        overrides["epochs"] = options.epochs
    if options.patience is not None:
        overrides["patience"] = options.patience
    if options.dropout is not None:
        overrides["dropout_rate"] = options.dropout
    if options.layer_sizes is not None:
        overrides["layer_sizes"] = options.layer_sizes
    net = NetworkConfig.for_profile(options.net_profile or settings.net_profile, **overrides)

    params: dict[str, object] = {
        "algorithm": info.algorithm,
        "censor": info.detection_limit,
        "net": net,
        "init": InitConfig(method="aknn", k=options.k or settings.default_k, rng_seed=seed),
    }
    if options.eps is not None:
        params["eps"] = options.eps
    if options.maxiter is not None:
        params["maxiter"] = options.maxiter
    if options.convergence is not None:
        params["convergence"] = options.convergence
    return ImputerConfig(**params)


def build_baseline(info: MethodInfo, options: MethodOptions, seed: int) -> BaselineKind:
    if info.baseline is None:
        raise ConfigurationError(f"{info.name} is not a baseline")
    return BaselineKind(kind=info.baseline, k=options.k or settings.default_k, seed=seed)


def build_runner(
    name: str, options: MethodOptions | None = None, seed: int | None = None
) -> Callable[[CompositionMatrix, DetectionLimits], ImputationReport]:
    """Готовая функция ``(X, d) -> ImputationReport`` для метода по имени."""
    options = options or MethodOptions()
    seed = settings.default_seed if seed is None else seed
    info = resolve_censor(get_method(name), options)
    if info.name != name:
        logger.info("method %s runs as %s (censor=%s)", name, info.name, options.censor)
    if info.is_network:
        cfg = build_imputer_config(info, options, seed)
        return lambda X, d: impute(X, d, cfg)
    kind = build_baseline(info, options, seed)
    return lambda X, d: impute_baseline(X, d, kind)


def run_method(
    name: str,
    X: CompositionMatrix,
    d: DetectionLimits,
    options: MethodOptions | None = None,
    seed: int | None = None,
) -> ImputationReport:
    return build_runner(name, options, seed)(X, d)
