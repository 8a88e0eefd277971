"""Упрощённые конкуренты для сравнения.

* ``knn_euclidean`` — медиана доноров по евклидову расстоянию на общих
  наблюдённых столбцах, без учёта предела обнаружения (может давать значения
  выше d_j);
* ``knn_aitchison`` — aknn-инициализация без отсечки по пределу;
* ``dl65`` / ``uniform_dl`` — одномерные правила, всегда в (0, d_j].

Это не реимплементации mice/missForest/impRZilr, а их представители по
категориям (CoDa / не CoDa × учитывает DL / нет).
"""

from __future__ import annotations

import logging

import numpy as np

from app.core.errors import ConfigurationError
from app.schemas.composition import CompositionMatrix, DetectionLimits
from app.schemas.config import BaselineKind
from app.schemas.reports import CellSource, ImputationReport
from app.services.knn_init import DL65_FRACTION, aknn_fill, dl65_fill, uniform_dl_fill

logger = logging.getLogger(__name__)


def knn_euclidean_fill(X: CompositionMatrix, d: DetectionLimits | None, k: int) -> tuple[np.ndarray, list[str]]:
    values = np.array(X.values, copy=True)
    observed = ~X.mask
    warnings: list[str] = []
    for r in np.flatnonzero(X.mask.any(axis=1)):
        dist = np.full(X.n, np.inf)
        for i in range(X.n):
            if i == r:
                continue
            common = observed[r] & observed[i]
            if not common.any():
                continue
            # RMS по общим столбцам.
            diff = X.values[r, common] - X.values[i, common]
            dist[i] = float(np.sqrt(np.mean(diff**2)))
        for j in np.flatnonzero(X.mask[r]):
            donors = np.flatnonzero(observed[:, j] & np.isfinite(dist))
            if donors.size == 0:
                if d is None or not d.has(j):
                    raise ConfigurationError(f"no donors and no detection limit for column {X.columns[j]}")
                values[r, j] = DL65_FRACTION * float(d.d[j])
                msg = f"knn: no donor with {X.columns[j]} observed for row {int(r)}; used 65% of DL"
                logger.warning(msg)
                warnings.append(msg)
                continue
            nearest = donors[np.argsort(dist[donors], kind="stable")[:k]]
            values[r, j] = float(np.median(X.values[nearest, j]))
    return values, warnings


def impute_baseline(X: CompositionMatrix, d: DetectionLimits, kind: BaselineKind) -> ImputationReport:
    label = {"knn_euclidean": "knn", "knn_aitchison": "aknn", "dl65": "dl65", "uniform_dl": "uniform-dl"}[kind.kind]
    provenance = np.where(X.mask, int(CellSource.PREDICTED), int(CellSource.OBSERVED)).astype(np.int8)
    warnings: list[str] = []
    if X.m == 0:
        values = np.array(X.values, copy=True)
    elif kind.kind == "knn_euclidean":
        values, warnings = knn_euclidean_fill(X, d, kind.k)
    elif kind.kind == "knn_aitchison":
        values, warnings = aknn_fill(X, d, kind.k, clamp=False)
    elif kind.kind == "dl65":
        values = dl65_fill(X, d)
    else:
        values = uniform_dl_fill(X, d, kind.seed)
    return ImputationReport(
        X_imputed=np.where(X.mask, values, X.values),
        iterations=0,
        delta_trace=[],
        converged=True,
        per_variable_order=X.masked_columns(),
        warnings=warnings,
        provenance=provenance,
        method=label,
    )
