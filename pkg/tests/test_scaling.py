# tests/test_scaling.py
import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from core.models import SimilarityMatrix
from core.scaling import zscore_row, zscore_rows


def test_zscore_row_by_hand():
    expected = np.array([-1.0, 0.0, 1.0]) / np.sqrt(2.0 / 3.0)
    assert_allclose(zscore_row([1.0, 2.0, 3.0]), expected, atol=1e-12)
    assert_allclose(zscore_row([1.0, 2.0, 3.0]), [-1.224744871, 0.0, 1.224744871], atol=1e-9)


def test_zero_spread_row_becomes_zeros():
    assert_array_equal(zscore_row([5.0, 5.0, 5.0]), [0.0, 0.0, 0.0])


def test_normalized_row_is_a_fixed_point():
    row = zscore_row([1.0, 2.0, 3.0])
    assert_allclose(zscore_row(row), row, atol=1e-12)


def test_rows_have_zero_mean_unit_std(rng):
    scaled = zscore_rows(SimilarityMatrix(rng.normal(3.0, 7.0, size=(12, 40))))
    assert_allclose(scaled.values.mean(axis=1), 0.0, atol=1e-12)
    assert_allclose(scaled.values.std(axis=1), 1.0, atol=1e-12)


def test_affine_invariance(rng):
    values = rng.normal(size=(10, 30))
    for a, b in [(0.01, -4.0), (3.5, 2.0), (250.0, 1e3)]:
        assert_allclose(zscore_rows(SimilarityMatrix(a * values + b)).values,
                        zscore_rows(SimilarityMatrix(values)).values, atol=1e-9)


def test_batch_equals_row_by_row(rng):
    matrix = SimilarityMatrix(rng.normal(size=(6, 11)))
    scaled = zscore_rows(matrix)
    for q in range(matrix.rows):
        assert_array_equal(scaled.values[q], zscore_row(matrix.values[q]))


def test_zscore_rows_is_idempotent(rng):
    values = rng.normal(5.0, 3.0, size=(15, 25))
    values[4] = 2.5
    once = zscore_rows(SimilarityMatrix(values))
    assert_allclose(zscore_rows(once).values, once.values, atol=1e-9)


def test_row_argmax_is_preserved(rng):
    values = rng.normal(size=(50, 60)) * rng.uniform(0.1, 10.0, size=(50, 1))
    scaled = zscore_rows(SimilarityMatrix(values))
    assert_array_equal(scaled.values.argmax(axis=1), values.argmax(axis=1))
