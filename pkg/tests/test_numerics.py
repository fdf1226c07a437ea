import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import row_echelon_rank
from priorsafe.numerics import (
    DimensionError,
    NoRightInverseError,
    inf_norm,
    null_space,
    right_inverse,
    row_rank_full,
    unvec,
    vec,
)

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


def test_inf_norm_examples():
    assert inf_norm(np.eye(2)) == 1.0
    M = np.array([[1.0, -2.0], [3.0, 0.0]])
    assert inf_norm(M) == max(abs(M[i, 0]) + abs(M[i, 1]) for i in range(2)) == 3.0
    assert inf_norm(np.zeros((3, 2))) == 0.0


def test_inf_norm_vectors_use_largest_entry():
    assert inf_norm([1.0, -4.0, 2.0]) == 4.0
    assert inf_norm(np.array([[1.0], [-4.0]])) == 4.0
    assert inf_norm(np.array([[1.0, -4.0, 2.0]])) == 4.0


def test_inf_norm_empty_raises():
    with pytest.raises(DimensionError):
        inf_norm(np.zeros((0, 2)))


@given(arrays(float, (3, 4), elements=finite), arrays(float, (3, 4), elements=finite), finite)
def test_inf_norm_is_a_norm(M, N, a):
    assert inf_norm(M + N) <= inf_norm(M) + inf_norm(N) + 1e-9
    assert inf_norm(a * M) == pytest.approx(abs(a) * inf_norm(M), rel=1e-12, abs=1e-12)


def test_vec_examples():
    np.testing.assert_array_equal(vec([[1, 2], [3, 4]]).ravel(), [1, 3, 2, 4])
    col = np.array([[1.0], [2.0], [5.0]])
    np.testing.assert_array_equal(vec(col), col)
    np.testing.assert_array_equal(vec([[7, 8, 9]]).ravel(), [7, 8, 9])


@given(arrays(float, (3, 2), elements=finite), arrays(float, (3, 2), elements=finite), finite, finite)
def test_vec_linear_bijection(M, N, a, b):
    np.testing.assert_allclose(vec(a * M + b * N), a * vec(M) + b * vec(N), atol=1e-9)
    np.testing.assert_array_equal(unvec(vec(M), M.shape), M)


def test_vec_column_layout():
    M = np.arange(12.0).reshape(3, 4)
    v = vec(M).ravel()
    for j in range(4):
        np.testing.assert_array_equal(v[j * 3 : (j + 1) * 3], M[:, j])


def test_row_rank_examples():
    assert row_rank_full(np.eye(2), 1e-9)
    assert not row_rank_full(np.array([[1.0, 2.0], [2.0, 4.0]]), 1e-9)
    with pytest.raises(ValueError):
        row_rank_full(np.eye(2), 0.0)


def test_row_rank_matches_elimination(rng):
    for _ in range(50):
        M = rng.standard_normal((2, 10))
        if rng.uniform() < 0.3:
            M[1] = 2.5 * M[0]
        assert row_rank_full(M) == (row_echelon_rank(M) == 2)


def test_right_inverse_examples():
    np.testing.assert_allclose(right_inverse(np.eye(2)), np.eye(2))
    M = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    R = right_inverse(M)
    assert R.shape == (3, 2)
    np.testing.assert_allclose(R, [[1, 0], [0, 1], [0, 0]], atol=1e-14)


def test_right_inverse_residual_and_minimum_norm(rng):
    for _ in range(20):
        M = rng.standard_normal((2, 6))
        R = right_inverse(M)
        assert inf_norm(M @ R - np.eye(2)) <= 1e-8
        # any other right inverse differs by a null-space component and is longer
        other = R + null_space(M) @ rng.standard_normal((4, 2))
        assert np.linalg.norm(R) <= np.linalg.norm(other) + 1e-12


def test_right_inverse_rank_deficient():
    with pytest.raises(NoRightInverseError):
        right_inverse(np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]))


def test_null_space_orthonormal(rng):
    M = rng.standard_normal((2, 5))
    N = null_space(M)
    assert N.shape == (5, 3)
    np.testing.assert_allclose(M @ N, 0.0, atol=1e-12)
    np.testing.assert_allclose(N.T @ N, np.eye(3), atol=1e-12)
