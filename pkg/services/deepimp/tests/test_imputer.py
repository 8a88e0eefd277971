"""EM-импутация: raw и pivot, отсечка по пределу, сходимость, провенанс."""

from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from app.core.errors import ConfigurationError
from app.schemas.composition import CompositionMatrix, DetectionLimits
from app.schemas.config import NetworkConfig
from app.schemas.reports import CellSource
from app.services.imputer import check_convergence, impute, impute_pivot, impute_raw, method_label

from .conftest import censored_synthetic, imputer_config, limits, loglinear_censored, matrix


def _linear_dataset(n: int = 150, seed: int = 21):
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(1.0, 2.0, n)
    x2 = rng.uniform(1.0, 2.0, n)
    x3 = 2.0 * x1 + 3.0 * x2 + 1e-4 * rng.normal(size=n)
    truth = np.column_stack([x1, x2, x3])
    row = int(np.argsort(x3)[n // 2])
    mask = np.zeros(truth.shape, dtype=bool)
    mask[row, 2] = True
    X = CompositionMatrix(np.where(mask, 0.0, truth), mask)
    return X, truth, row


def _desk(**overrides) -> NetworkConfig:
    return NetworkConfig.desk(dropout_rate=0.0, **overrides)


# ─── check_convergence ──────────────────────────────────────────────────────


def test_convergence_below_eps():
    assert check_convergence([0.5], 1.0, 10) == (True, True)


def test_convergence_continue():
    assert check_convergence([3.0, 2.0], 1.0, 10) == (False, False)


def test_convergence_maxiter_warns(caplog):
    assert check_convergence([5.0, 4.0, 3.0], 1.0, 3) == (False, True)
    assert "did not converge" in caplog.text


def test_method_labels():
    assert method_label(imputer_config("raw", censor=True)) == "deepImp-dl"
    assert method_label(imputer_config("raw", censor=False)) == "deepImp"
    assert method_label(imputer_config("pivot", censor=True)) == "deepImpCoDa-dl"
    assert method_label(imputer_config("pivot", censor=False)) == "deepImpCoDa"


# ─── common contract ────────────────────────────────────────────────────────


@pytest.mark.parametrize("algorithm", ["raw", "pivot"])
def test_no_masked_cells_returns_input(algorithm):
    X = matrix([[1.0, 2.0, 3.0], [2.0, 1.0, 4.0]])
    report = impute(X, DetectionLimits.empty(3), imputer_config(algorithm))
    assert report.iterations == 0
    assert report.converged
    assert_array_equal(report.X_imputed, X.values)


@pytest.mark.parametrize("algorithm", ["raw", "pivot"])
def test_censored_run_contract(small_censored, algorithm):
    X, d = small_censored.X, small_censored.limits
    report = impute(X, d, imputer_config(algorithm))

    assert_array_equal(report.X_imputed[~X.mask], X.values[~X.mask])
    limit = np.broadcast_to(d.d, X.values.shape)
    imputed = report.X_imputed[X.mask]
    assert (imputed > 0).all()
    assert (imputed <= limit[X.mask]).all()

    assert (report.provenance[~X.mask] == CellSource.OBSERVED).all()
    assert (report.provenance[X.mask] != CellSource.OBSERVED).all()
    assert report.iterations == len(report.delta_trace) >= 1
    assert report.method == method_label(imputer_config(algorithm))


@pytest.mark.parametrize("algorithm", ["raw", "pivot"])
def test_same_seed_same_result(small_censored, algorithm):
    X, d = small_censored.X, small_censored.limits
    cfg = imputer_config(algorithm, maxiter=2)
    a = impute(X, d, cfg)
    b = impute(X, d, cfg)
    assert_array_equal(a.X_imputed, b.X_imputed)
    assert a.delta_trace == b.delta_trace


@pytest.mark.parametrize("algorithm", ["raw", "pivot"])
def test_maxiter_reached_without_convergence(small_censored, algorithm):
    X, d = small_censored.X, small_censored.limits
    report = impute(X, d, imputer_config(algorithm, maxiter=2, eps=0.0))
    assert report.iterations == 2
    assert not report.converged
    assert any("not converged" in w for w in report.warnings)


def test_columns_processed_fewest_missing_first():
    data = censored_synthetic(n=60, D=4, q=0.05)
    values = np.array(data.X.values, copy=True)
    mask = np.array(data.X.mask, copy=True)
    # Дополнительные нули во втором столбце.
    extra = np.flatnonzero(~mask[:, 1])[:5]
    mask[extra, 1] = True
    values[extra, 1] = 0.0
    d = np.array(data.limits.d, copy=True)
    d[1] = float(data.truth[extra, 1].max()) * 1.01
    X = CompositionMatrix(values, mask)
    report = impute(X, DetectionLimits(d), imputer_config("raw", maxiter=1))
    counts = mask.sum(axis=0)
    assert [int(counts[j]) for j in report.per_variable_order] == sorted(int(c) for c in counts if c)
    assert report.per_variable_order[-1] == 1


def test_column_with_too_few_observations_keeps_initialization(caplog):
    rng = np.random.default_rng(3)
    values = rng.uniform(1.0, 2.0, size=(8, 3))
    mask = np.zeros(values.shape, dtype=bool)
    mask[:4, 0] = True
    X = CompositionMatrix(np.where(mask, 0.0, values), mask)
    report = impute_raw(X, limits(0.9, None, None), imputer_config("raw", maxiter=1))
    assert (report.provenance[mask] == CellSource.INITIALIZED).all()
    assert any("observed rows" in w for w in report.warnings)
    assert "kept initialization" in caplog.text


def test_missing_limit_is_rejected(small_censored):
    X = small_censored.X
    with pytest.raises(ConfigurationError, match=X.columns[X.masked_columns()[0]]):
        impute(X, DetectionLimits.empty(X.D), imputer_config("pivot"))


def test_entry_points_check_algorithm(small_censored):
    X, d = small_censored.X, small_censored.limits
    with pytest.raises(ConfigurationError):
        impute_raw(X, d, imputer_config("pivot"))
    with pytest.raises(ConfigurationError):
        impute_pivot(X, d, imputer_config("raw"))


def test_squared_relative_statistic_and_warm_start(small_censored):
    X, d = small_censored.X, small_censored.limits
    report = impute(X, d, imputer_config("pivot", convergence="squared_relative", warm_start=True, maxiter=2))
    assert all(delta >= 0 for delta in report.delta_trace)
    assert_array_equal(report.X_imputed[~X.mask], X.values[~X.mask])


# ─── raw algorithm ──────────────────────────────────────────────────────────


def test_raw_recovers_linear_relation():
    X, truth, row = _linear_dataset()
    d = limits(None, None, float(truth[row, 2]) * 1.3)
    report = impute_raw(X, d, imputer_config("raw", net=_desk(), maxiter=2, censor=True))
    assert report.X_imputed[row, 2] == pytest.approx(truth[row, 2], rel=0.05)


def test_raw_clamps_overprediction_to_limit():
    X, truth, row = _linear_dataset()
    limit = float(truth[row, 2]) * 0.5
    report = impute_raw(X, limits(None, None, limit), imputer_config("raw", net=_desk(), maxiter=1))
    assert report.X_imputed[row, 2] == limit
    assert report.provenance[row, 2] == CellSource.CLAMPED_DL


def test_raw_without_censoring_can_exceed_limit():
    X, truth, row = _linear_dataset()
    limit = float(truth[row, 2]) * 0.5
    report = impute_raw(X, limits(None, None, limit), imputer_config("raw", net=_desk(), maxiter=1, censor=False))
    assert report.X_imputed[row, 2] > limit


# ─── pivot algorithm ────────────────────────────────────────────────────────


def _loglinear_dataset(n: int = 150, seed: int = 17):
    """Один фактор без шума; пропуски — отдельные ячейки из середины диапазона."""
    rng = np.random.default_rng(seed)
    f = rng.normal(size=n)
    truth = np.exp(np.array([0.5, 1.0, -0.2, 0.3]) + np.outer(f, [0.6, -0.4, 0.9, 0.2]))
    middle = np.argsort(f)[[60, 70, 80, 90]]
    mask = np.zeros(truth.shape, dtype=bool)
    mask[middle[[0, 2]], 1] = True
    mask[middle[[1, 3]], 2] = True
    X = CompositionMatrix(np.where(mask, 0.0, truth), mask)
    d = [float(truth[mask[:, j], j].max()) * 1.5 if mask[:, j].any() else None for j in range(4)]
    return X, truth, limits(*d)


def test_pivot_recovers_log_linear_parts():
    X, truth, d = _loglinear_dataset()
    cfg = imputer_config("pivot", net=_desk(epochs=400, patience=60), maxiter=3)
    report = impute_pivot(X, d, cfg)
    imputed = report.X_imputed[X.mask]
    rel = np.abs(imputed - truth[X.mask]) / truth[X.mask]
    assert (rel < 0.05).all(), rel
    limit = np.broadcast_to(d.d, X.values.shape)[X.mask]
    assert (imputed > 0).all()
    assert (imputed <= limit).all()
    assert_array_equal(report.X_imputed[~X.mask], truth[~X.mask])


def test_pivot_censoring_is_noop_when_limits_are_far():
    data = loglinear_censored()
    X = data.X
    far = DetectionLimits(np.full(X.D, 100.0 * float(data.truth.max())))
    censored, free = (impute(X, far, imputer_config("pivot", net=_desk(), maxiter=2, censor=c)) for c in (True, False))
    assert_array_equal(censored.X_imputed, free.X_imputed)
    assert not (censored.provenance == CellSource.CLAMPED_DL).any()


def test_pivot_two_parts_uses_geometric_mean_of_ratios():
    values = np.array([[2.0, 1.0], [3.0, 1.5], [1.0, 2.0], [4.0, 1.0], [2.5, 2.0], [0.0, 3.0]])
    X = matrix(values)
    report = impute_pivot(X, limits(100.0, None), imputer_config("pivot", maxiter=3))
    observed = values[:5]
    ratio = np.exp(np.log(observed[:, 0] / observed[:, 1]).mean())
    assert report.X_imputed[5, 0] == pytest.approx(3.0 * ratio, rel=1e-10)
    assert report.provenance[5, 0] == CellSource.FALLBACK
    assert report.converged


def test_pivot_two_parts_censoring_clamps_to_limit():
    values = np.array([[2.0, 1.0], [3.0, 1.5], [1.0, 2.0], [4.0, 1.0], [2.5, 2.0], [0.0, 3.0]])
    report = impute_pivot(matrix(values), limits(0.5, None), imputer_config("pivot", maxiter=2))
    assert_allclose(report.X_imputed[5, 0], 0.5, rtol=1e-12)
    assert report.X_imputed[5, 0] <= 0.5


def test_run_report_counts_cell_sources(small_censored):
    X, d = small_censored.X, small_censored.limits
    report = impute(X, d, imputer_config("raw", maxiter=1))
    run = report.to_run_report(X.columns)
    assert sum(run.cell_sources.values()) == X.m
    assert run.per_variable_order == [X.columns[j] for j in report.per_variable_order]
    assert run.method == "deepImp-dl"
