"""Замыкание, pivot-координаты, подгонка масштаба, расстояние Эйтчисона."""

from __future__ import annotations

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from app.core.errors import CodaDomainError, ShapeError
from app.schemas.composition import CompositionMatrix
from app.services.coda import (
    aitchison_distance,
    aitchison_pdist,
    closure,
    dl_to_pivot,
    dl_to_pivot_rows,
    pivot_basis,
    pivot_forward,
    pivot_inverse,
    readjust_absolute,
    rescale_to_totals,
)

from .conftest import matrix


# ─── closure ────────────────────────────────────────────────────────────────


@pytest.mark.parametrize(
    ("x", "kappa", "expected"),
    [
        ((1, 1, 2), 1.0, (0.25, 0.25, 0.5)),
        ((5, 5, 5), 3.0, (1, 1, 1)),
        ((2, 3, 5), 100.0, (20, 30, 50)),
    ],
)
def test_closure_examples(x, kappa, expected):
    assert_allclose(closure(np.array(x, dtype=float), kappa), expected, rtol=1e-15)


def test_closure_rows_of_matrix():
    out = closure(np.array([[1.0, 3.0], [2.0, 2.0]]), 10.0)
    assert_allclose(out, [[2.5, 7.5], [5.0, 5.0]])


def test_closure_rejects_nonpositive_part():
    with pytest.raises(CodaDomainError):
        closure(np.array([1.0, 0.0, 2.0]))


def test_closure_rejects_nonpositive_kappa():
    with pytest.raises(CodaDomainError):
        closure(np.array([1.0, 2.0]), 0.0)


# ─── pivot_forward / pivot_inverse ──────────────────────────────────────────


def test_pivot_basis_is_orthonormal_and_centred():
    for d in (2, 3, 7):
        V = pivot_basis(d)
        assert V.shape == (d, d - 1)
        assert_allclose(V.T @ V, np.eye(d - 1), atol=1e-14)
        assert_allclose(V.sum(axis=0), 0.0, atol=1e-14)


def test_pivot_forward_two_parts():
    z = pivot_forward(np.array([[math.e, 1.0]]), 0).z
    assert z.shape == (1, 1)
    assert z[0, 0] == pytest.approx(0.7071067811865476, rel=1e-12)


def test_pivot_forward_equal_parts_is_zero():
    assert_allclose(pivot_forward(np.full((2, 5), 3.7)).z, 0.0, atol=1e-14)


def test_pivot_forward_scale_invariant(rng):
    x = rng.uniform(0.1, 5.0, size=(4, 6))
    assert_allclose(pivot_forward(x).z, pivot_forward(10.0 * x).z, atol=1e-12)


def test_pivot_forward_first_coordinate_uses_pivot(rng):
    x = rng.uniform(0.1, 5.0, size=(3, 5))
    pc = pivot_forward(x, pivot_var=2)
    assert pc.pivot == 2
    assert_array_equal(pc.perm, [2, 0, 1, 3, 4])
    others = np.delete(x, 2, axis=1)
    expected = np.sqrt(4 / 5) * (np.log(x[:, 2]) - np.log(others).mean(axis=1))
    assert_allclose(pc.z[:, 0], expected, rtol=1e-12)


def test_pivot_forward_rejects_uninitialized_matrix():
    X = matrix([[1.0, 0.0, 2.0], [1.0, 2.0, 3.0]])
    with pytest.raises(CodaDomainError) as exc:
        pivot_forward(X)
    assert exc.value.row == 0
    assert exc.value.column == 1


def test_pivot_inverse_zero_coordinates_give_equal_parts():
    pc = pivot_forward(np.ones((1, 3)))
    out = pivot_inverse(pc.with_z(np.zeros((1, 2))))
    assert_allclose(out, [[1.0, 1.0, 1.0]], rtol=1e-15)


def test_pivot_inverse_two_parts_ratio():
    pc = pivot_forward(np.array([[2.0, 1.0]]))
    out = pivot_inverse(pc.with_z(np.array([[0.7071067811865476]])))
    assert out[0, 0] / out[0, 1] == pytest.approx(math.e, rel=1e-12)


@pytest.mark.parametrize("pivot_var", [0, 3, 6])
def test_pivot_inverse_is_proportional_to_input(rng, pivot_var):
    x = rng.uniform(0.01, 50.0, size=(20, 7))
    back = pivot_inverse(pivot_forward(x, pivot_var))
    ratio = back / x
    assert_allclose(ratio, ratio[:, :1] * np.ones((1, 7)), rtol=1e-12)


@pytest.mark.parametrize("d", [3, 10, 17])
def test_round_trip_recovers_rows(d):
    rng = np.random.default_rng(d)
    x = rng.lognormal(0.0, 1.5, size=(1000, d))
    pc = pivot_forward(x)
    back = pivot_inverse(pc)

    rescaled = rescale_to_totals(back, pc.row_totals)
    assert np.max(np.abs(rescaled - x) / x) <= 1e-10

    ref = CompositionMatrix(x, np.zeros(x.shape, dtype=bool))
    adjusted = readjust_absolute(back, ref)
    assert np.max(np.abs(adjusted - x) / x) <= 1e-10


def test_pivot_inverse_rejects_non_finite():
    pc = pivot_forward(np.ones((1, 3)))
    with pytest.raises(CodaDomainError):
        pivot_inverse(pc.with_z(np.array([[np.inf, 0.0]])))


def test_pivot_permutation_out_of_range():
    with pytest.raises(ShapeError):
        pivot_forward(np.ones((1, 3)), pivot_var=3)


# ─── readjust_absolute ──────────────────────────────────────────────────────


def test_readjust_scales_by_observed_sum():
    ref = matrix([[4.0, 2.0, 0.0]])
    out = readjust_absolute(np.array([[2.0, 1.0, 1.0]]), ref)
    assert_allclose(out, [[4.0, 2.0, 2.0]], rtol=1e-15)


def test_readjust_row_without_masked_cells_returns_reference():
    ref = matrix([[1.5, 2.5, 3.0]])
    out = readjust_absolute(2.0 * np.array([[1.5, 2.5, 3.0]]), ref)
    assert_array_equal(out, ref.values)


def test_readjust_keeps_observed_cells_exact(rng):
    values = rng.uniform(0.5, 2.0, size=(6, 4))
    mask = np.zeros(values.shape, dtype=bool)
    mask[[0, 3], [1, 2]] = True
    ref = CompositionMatrix(np.where(mask, 0.0, values), mask)
    out = readjust_absolute(rng.uniform(0.1, 1.0, size=values.shape), ref)
    assert_array_equal(out[~mask], ref.values[~mask])
    assert (out[mask] > 0).all()


def test_readjust_all_masked_row_uses_fallback_totals(caplog):
    ref = CompositionMatrix(np.array([[0.0, 0.0], [1.0, 3.0]]), np.array([[True, True], [False, False]]))
    out = readjust_absolute(np.array([[1.0, 1.0], [2.0, 6.0]]), ref, fallback_totals=np.array([10.0, 4.0]))
    assert_allclose(out[0], [5.0, 5.0])
    assert "rows without observed parts" in caplog.text


def test_readjust_shape_mismatch():
    with pytest.raises(ShapeError):
        readjust_absolute(np.ones((2, 3)), matrix([[1.0, 2.0, 3.0]]))


# ─── Aitchison distance ─────────────────────────────────────────────────────


def test_aitchison_distance_identity_and_scale(rng):
    x = rng.uniform(0.1, 3.0, size=5)
    assert aitchison_distance(x, x) == 0.0
    assert aitchison_distance(x, 7.5 * x) == pytest.approx(0.0, abs=1e-12)


def test_aitchison_distance_two_parts():
    assert aitchison_distance(np.array([1.0, 1.0]), np.array([math.e**2, 1.0])) == pytest.approx(
        1.4142135623730951, rel=1e-12
    )


def test_aitchison_distance_matches_log_ratio_sum(rng):
    x = rng.uniform(0.1, 3.0, size=4)
    y = rng.uniform(0.1, 3.0, size=4)
    total = sum(
        (np.log(x[i] / x[j]) - np.log(y[i] / y[j])) ** 2 for i in range(4) for j in range(i + 1, 4)
    )
    assert aitchison_distance(x, y) == pytest.approx(np.sqrt(total / 4), rel=1e-12)


def test_pivot_coordinates_are_isometric():
    rng = np.random.default_rng(7)
    x = rng.lognormal(0.0, 1.0, size=(1000, 6))
    y = rng.lognormal(0.0, 1.0, size=(1000, 6))
    zx = pivot_forward(x).z
    zy = pivot_forward(y).z
    for i in range(1000):
        d_a = aitchison_distance(x[i], y[i])
        assert abs(d_a - np.linalg.norm(zx[i] - zy[i])) / d_a <= 1e-10


def test_pdist_matches_pairwise(rng):
    X = rng.uniform(0.1, 3.0, size=(5, 4))
    condensed = aitchison_pdist(X)
    k = 0
    for i in range(5):
        for j in range(i + 1, 5):
            expected = aitchison_distance(X[i], X[j])
            assert condensed[k] == pytest.approx(expected, rel=1e-12)
            k += 1


# ─── detection limit in coordinates ─────────────────────────────────────────


def test_dl_to_pivot_geometric_mean_equals_limit():
    assert dl_to_pivot(np.array([0.0, 1.0, 1.0, 1.0]), 1.0, 0) == pytest.approx(0.0, abs=1e-15)


def test_dl_to_pivot_two_parts():
    assert dl_to_pivot(np.array([0.0, 1.0]), 0.5, 0) == pytest.approx(-0.4901290717342735, rel=1e-12)


def test_dl_to_pivot_doubling_limit(rng):
    row = rng.uniform(0.5, 2.0, size=4)
    lo = dl_to_pivot(row, 0.3, 2)
    hi = dl_to_pivot(row, 0.6, 2)
    assert hi - lo == pytest.approx(np.sqrt(3 / 4) * np.log(2.0), rel=1e-12)


def test_dl_to_pivot_matches_forward_with_limit_in_place(rng):
    X = rng.uniform(0.5, 2.0, size=(5, 4))
    phi = dl_to_pivot_rows(X, 0.2, 1).phi
    at_limit = X.copy()
    at_limit[:, 1] = 0.2
    assert_allclose(phi, pivot_forward(at_limit, 1).z[:, 0], rtol=1e-12)


def test_dl_to_pivot_rejects_bad_limit():
    with pytest.raises(CodaDomainError):
        dl_to_pivot(np.array([1.0, 1.0]), 0.0, 0)
