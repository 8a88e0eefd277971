"""EM-импутация округлённых нулей нейросетями.

Два алгоритма с общим внешним циклом:

  * ``raw`` — регрессия столбца j на все остальные столбцы в исходной шкале;
  * ``pivot`` — столбец j переставляется первым, сеть регрессирует z_1 на
    z_2…z_{D−1}, прогноз возвращается через обратное pivot-преобразование и
    подгонку абсолютных значений.

Один внешний проход = все столбцы с нулями обработаны по разу. Δ в обоих
алгоритмах считается по маскированным ячейкам в исходной шкале, поэтому
сходимость сравнима. Наблюдённые ячейки никогда не перезаписываются.
"""

from __future__ import annotations

import logging
from collections.abc import Callable

import numpy as np

from app.core.errors import ConfigurationError, ImputationError
from app.schemas.composition import CompositionMatrix, DetectionLimits
from app.schemas.config import ImputerConfig
from app.schemas.reports import CellSource, ImputationReport
from app.services.coda import dl_to_pivot_rows, pivot_forward, pivot_inverse, readjust_absolute
from app.services.knn_init import initialize
from app.services.neuralnet import Network, fit, init_network, predict

logger = logging.getLogger(__name__)


def method_label(cfg: ImputerConfig) -> str:
    base = "deepImp" if cfg.algorithm == "raw" else "deepImpCoDa"
    return f"{base}-dl" if cfg.censor else base


def check_convergence(trace: list[float], eps: float, maxiter: int) -> tuple[bool, bool]:
    """(converged, stop): стоп при Δ ≤ eps или после maxiter итераций."""
    if not trace:
        raise ValueError("convergence trace is empty")
    converged = trace[-1] <= eps
    stop = converged or len(trace) >= maxiter
    if stop and not converged:
        logger.warning(
            "EM did not converge after %d iterations: last delta=%.6g > eps=%.6g",
            len(trace), trace[-1], eps,
        )
    return converged, stop


def _delta(new: np.ndarray, old: np.ndarray, stat: str) -> float:
    if new.size == 0:
        return 0.0
    if stat == "squared_relative":
        return float(np.sum(((new - old) / old) ** 2))
    return float(np.mean(np.abs(new - old)))


def _column_order(mask: np.ndarray, order: str) -> list[int]:
    cols = [int(j) for j in np.flatnonzero(mask.any(axis=0))]
    if order == "fewest_missing_first":
        counts = mask.sum(axis=0)
        cols.sort(key=lambda j: (int(counts[j]), j))
    return cols


def _derive_seed(base: int, iteration: int, column: int) -> int:
    return int(np.random.SeedSequence([base, iteration, column]).generate_state(1)[0])


class _EMState:
    """Рабочее состояние одного прогона: текущая матрица, провенанс, сети."""

    def __init__(self, X: CompositionMatrix, d: DetectionLimits, cfg: ImputerConfig, work: np.ndarray) -> None:
        self.X = X
        self.d = d
        self.cfg = cfg
        self.work = work
        self.provenance = np.where(X.mask, int(CellSource.INITIALIZED), int(CellSource.OBSERVED)).astype(np.int8)
        self.nets: dict[int, Network] = {}

    def fit_predict(
        self, j: int, iteration: int, X_obs: np.ndarray, y_obs: np.ndarray, X_mis: np.ndarray
    ) -> np.ndarray:
        seed = _derive_seed(self.cfg.net.rng_seed, iteration, j)
        net_cfg = self.cfg.net.model_copy(update={"rng_seed": seed})
        prev = self.nets.get(j) if self.cfg.warm_start else None
        if prev is None:
            net = init_network(
                X_obs.shape[1],
                net_cfg.layer_sizes,
                np.random.default_rng([seed, 0]),
                dropout_rate=net_cfg.dropout_rate,
            )
        else:
            net = prev
        net, report = fit(net, X_obs, y_obs, net_cfg)
        logger.debug(
            "column %s iter %d: best epoch %d of %d", self.X.columns[j], iteration, report.best_epoch, report.stopped_epoch
        )
        if self.cfg.warm_start:
            self.nets[j] = net
        return predict(net, X_mis)


def _raw_step(state: _EMState, j: int, iteration: int) -> None:
    X, cfg, work = state.X, state.cfg, state.work
    mis = X.mask[:, j]
    obs = ~mis
    features = np.delete(work, j, axis=1)
    pred = state.fit_predict(j, iteration, features[obs], work[obs, j], features[mis])
    src = np.full(pred.shape, int(CellSource.PREDICTED), dtype=np.int8)
    if cfg.censor:
        limit = float(state.d.d[j])
        above = pred > limit
        pred[above] = limit
        src[above] = CellSource.CLAMPED_DL
        low = pred <= 0
        pred[low] = cfg.floor_fraction * limit
        src[low] = CellSource.FLOORED
    work[mis, j] = pred
    state.provenance[mis, j] = src


def _pivot_step(state: _EMState, j: int, iteration: int) -> None:
    X, cfg, work = state.X, state.cfg, state.work
    mis = X.mask[:, j]
    obs = ~mis
    pc = pivot_forward(work, j)
    z = pc.z
    if X.D == 2:
        # Предикторов нет: среднее наблюдённых z_1 = геометрическое среднее отношений.
        pred = np.full(int(mis.sum()), float(z[obs, 0].mean()))
        src = np.full(pred.shape, int(CellSource.FALLBACK), dtype=np.int8)
    else:
        pred = state.fit_predict(j, iteration, z[obs, 1:], z[obs, 0], z[mis, 1:])
        src = np.full(pred.shape, int(CellSource.PREDICTED), dtype=np.int8)

    limit = float(state.d.d[j]) if state.d.has(j) else np.nan
    if cfg.censor:
        phi = dl_to_pivot_rows(work[mis], limit, j).phi
        above = pred > phi
        pred = np.minimum(pred, phi)
        src[above] = CellSource.CLAMPED_DL

    z_new = np.array(z, copy=True)
    z_new[mis, 0] = pred
    back = pivot_inverse(pc.with_z(z_new))
    bad = ~(np.isfinite(back) & (back > 0))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ImputationError(
            f"inverse pivot transform produced an invalid value at row {int(r)}, column {X.columns[int(c)]} "
            f"while imputing {X.columns[j]}"
        )
    adjusted = readjust_absolute(back, X, fallback_totals=pc.row_totals)
    values = adjusted[mis, j]
    if cfg.censor:
        # После подгонки масштаба значение может уйти на ulp выше предела.
        values = np.minimum(values, limit)
    work[mis, j] = values
    state.provenance[mis, j] = src


def _run(
    X: CompositionMatrix,
    d: DetectionLimits,
    cfg: ImputerConfig,
    step: Callable[[_EMState, int, int], None],
) -> ImputationReport:
    label = method_label(cfg)
    if X.m == 0:
        return ImputationReport(
            X_imputed=np.array(X.values, copy=True),
            iterations=0,
            delta_trace=[],
            converged=True,
            per_variable_order=[],
            provenance=np.zeros(X.values.shape, dtype=np.int8),
            method=label,
        )
    d.validate_for(X)
    init, warnings = initialize(X, d, cfg.init)
    state = _EMState(X, d, cfg, np.array(init.values, copy=True))
    order = _column_order(X.mask, cfg.order)

    skip: set[int] = set()
    for j in order:
        n_obs = int((~X.mask[:, j]).sum())
        if n_obs < cfg.min_observed:
            msg = f"column {X.columns[j]}: only {n_obs} observed rows (< {cfg.min_observed}); kept initialization"
            logger.warning(msg)
            warnings.append(msg)
            skip.add(j)

    trace: list[float] = []
    converged = False
    iteration = 0
    while True:
        iteration += 1
        old = state.work[X.mask].copy()
        for j in order:
            if j not in skip:
                step(state, j, iteration)
        trace.append(_delta(state.work[X.mask], old, cfg.convergence))
        logger.info("%s iteration %d: delta=%.6g", label, iteration, trace[-1])
        converged, stop = check_convergence(trace, cfg.eps, cfg.maxiter)
        if stop:
            break

    if not converged:
        warnings.append(
            f"not converged after {iteration} iterations (last delta {trace[-1]:.6g} > eps {cfg.eps:.6g})"
        )
    out = np.where(X.mask, state.work, X.values)
    return ImputationReport(
        X_imputed=out,
        iterations=iteration,
        delta_trace=trace,
        converged=converged,
        per_variable_order=order,
        warnings=warnings,
        provenance=state.provenance,
        method=label,
    )


def impute_raw(X: CompositionMatrix, d: DetectionLimits, cfg: ImputerConfig) -> ImputationReport:
    """Импутация без log-ratio: сеть x_j ~ остальные столбцы."""
    if cfg.algorithm != "raw":
        raise ConfigurationError(f"impute_raw needs algorithm='raw', got {cfg.algorithm!r}")
    return _run(X, d, cfg, _raw_step)


def impute_pivot(X: CompositionMatrix, d: DetectionLimits, cfg: ImputerConfig) -> ImputationReport:
    """Импутация в pivot-координатах: сеть z_1 ~ (z_2, …, z_{D−1})."""
    if cfg.algorithm != "pivot":
        raise ConfigurationError(f"impute_pivot needs algorithm='pivot', got {cfg.algorithm!r}")
    return _run(X, d, cfg, _pivot_step)


def impute(X: CompositionMatrix, d: DetectionLimits, cfg: ImputerConfig) -> ImputationReport:
    return impute_raw(X, d, cfg) if cfg.algorithm == "raw" else impute_pivot(X, d, cfg)
