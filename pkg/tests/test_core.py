import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from boolmf.core import (
    as_bool_matrix,
    boolean_product,
    masked_error,
    reconstruction_error,
    xor_product,
)
from boolmf.errors import BoolMFError, DimensionError


def bool_mats(shape):
    return arrays(np.uint8, shape, elements=st.integers(0, 1))


@st.composite
def factor_pair(draw, max_dim=6):
    M, K, N = (draw(st.integers(1, max_dim)) for _ in range(3))
    return draw(bool_mats((M, K))), draw(bool_mats((K, N)))


class TestBooleanProduct:
    def test_identity(self):
        I = np.eye(2, dtype=np.uint8)
        np.testing.assert_array_equal(boolean_product(I, I), I)

    def test_rank_one_all_ones(self):
        np.testing.assert_array_equal(boolean_product([[1], [1]], [[1, 1]]), np.ones((2, 2)))

    def test_hand_example(self):
        Z = boolean_product([[1, 0], [1, 1]], [[1, 0], [0, 1]])
        np.testing.assert_array_equal(Z, [[1, 0], [1, 1]])

    def test_saturates_instead_of_counting(self):
        # two covering components still give 1, not 2
        np.testing.assert_array_equal(boolean_product([[1, 1]], [[1], [1]]), [[1]])

    def test_inner_mismatch(self):
        with pytest.raises(DimensionError):
            boolean_product(np.ones((2, 3)), np.ones((2, 2)))

    def test_rejects_non_binary(self):
        with pytest.raises(BoolMFError):
            boolean_product([[2]], [[1]])

    @given(factor_pair())
    def test_matches_definition(self, pair):
        X, Y = pair
        Z = boolean_product(X, Y)
        M, K = X.shape
        N = Y.shape[1]
        for m in range(M):
            for n in range(N):
                assert Z[m, n] == int(any(X[m, k] and Y[k, n] for k in range(K)))

    @given(factor_pair())
    def test_or_idempotent(self, pair):
        Z = boolean_product(*pair)
        np.testing.assert_array_equal(Z | Z, Z)

    @given(bool_mats((5, 1)), bool_mats((1, 7)))
    def test_rank_one_rows_are_tiles(self, X, Y):
        Z = boolean_product(X, Y)
        for row in Z:
            assert not row.any() or np.array_equal(row, Y[0])


class TestXorProduct:
    def test_identity(self):
        I = np.eye(2, dtype=np.uint8)
        np.testing.assert_array_equal(xor_product(I, I), I)

    def test_parity_cancels(self):
        np.testing.assert_array_equal(xor_product([[1, 1]], [[1], [1]]), [[0]])

    def test_hand_example(self):
        Z = xor_product([[1, 1], [1, 0]], [[1, 1], [0, 1]])
        np.testing.assert_array_equal(Z, [[1, 0], [1, 1]])

    def test_inner_mismatch(self):
        with pytest.raises(DimensionError):
            xor_product(np.ones((1, 2)), np.ones((3, 1)))

    @given(factor_pair())
    def test_agrees_with_or_when_no_overlap(self, pair):
        X, Y = pair
        counts = X.astype(int) @ Y.astype(int)
        agree = counts <= 1
        np.testing.assert_array_equal(xor_product(X, Y)[agree], boolean_product(X, Y)[agree])


class TestReconstructionError:
    def test_identical(self):
        Z = np.eye(3, dtype=np.uint8)
        assert reconstruction_error(Z, Z) == 0.0

    def test_full_disagreement(self):
        assert reconstruction_error(np.zeros((2, 2)), np.ones((2, 2))) == 1.0

    def test_one_quarter(self):
        assert reconstruction_error([[1, 0], [0, 1]], [[1, 1], [0, 1]]) == 0.25

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            reconstruction_error(np.zeros((2, 2)), np.zeros((2, 3)))

    @settings(max_examples=50)
    @given(st.data())
    def test_metric_properties(self, data):
        shape = (data.draw(st.integers(1, 5)), data.draw(st.integers(1, 5)))
        A, B, C = (data.draw(bool_mats(shape)) for _ in range(3))
        assert reconstruction_error(A, B) == reconstruction_error(B, A)
        assert reconstruction_error(A, C) <= reconstruction_error(A, B) + reconstruction_error(B, C) + 1e-12
        assert 0.0 <= reconstruction_error(A, B) <= 1.0


class TestMaskedError:
    def test_only_masked_cells_count(self):
        Z = np.zeros((2, 2))
        Zhat = np.array([[1, 0], [0, 0]])
        mask = np.array([[False, True], [True, True]])
        assert masked_error(Z, Zhat, mask) == 0.0
        assert masked_error(Z, Zhat, ~mask) == 1.0

    def test_empty_mask(self):
        assert masked_error(np.zeros((2, 2)), np.ones((2, 2)), np.zeros((2, 2), bool)) == 0.0


class TestAsBoolMatrix:
    def test_read_only_copy(self):
        src = np.array([[1, 0]])
        out = as_bool_matrix(src)
        assert out.dtype == np.uint8
        assert not out.flags.writeable
        src[0, 0] = 0
        assert out[0, 0] == 1

    def test_does_not_freeze_caller_array(self):
        src = np.array([[1, 0]], dtype=np.uint8)
        as_bool_matrix(src, copy=False)
        assert src.flags.writeable

    def test_rejects_1d(self):
        with pytest.raises(BoolMFError):
            as_bool_matrix([1, 0])
