import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from longtail.errors import ArgumentError, ShapeError
from longtail.numeric import RngStream, matmul, relu, rng_uniform, softmax, tensor


class TestMatmul:
    def test_identity(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(matmul(np.eye(2), a), a)

    def test_zero(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(matmul(a, np.zeros((2, 2))), np.zeros((2, 2)))

    def test_hand_product(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        b = np.array([[5.0, 6.0], [7.0, 8.0]])
        assert np.array_equal(matmul(a, b), np.array([[19.0, 22.0], [43.0, 50.0]]))

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
            matmul(np.ones((2, 3)), np.ones((2, 2)))

    def test_associativity_on_random_chains(self, rng_np):
        for _ in range(20):
            a = rng_np.normal(size=(4, 6))
            b = rng_np.normal(size=(6, 3))
            c = rng_np.normal(size=(3, 5))
            left = matmul(matmul(a, b), c)
            right = matmul(a, matmul(b, c))
            denom = max(np.abs(left).max(), 1.0)
            assert np.abs(left - right).max() / denom <= 1e-9


class TestSoftmax:
    def test_constant_vector_is_uniform(self):
        for c in (-3.0, 0.0, 17.5):
            out = softmax(np.full(3, c))
            assert np.allclose(out, 1.0 / 3.0, atol=1e-15)

    def test_closed_form(self):
        out = softmax(np.array([0.0, math.log(2.0)]))
        assert np.allclose(out, [1.0 / 3.0, 2.0 / 3.0], atol=1e-15)

    def test_shift_invariance(self, rng_np):
        v = rng_np.normal(size=8)
        assert np.allclose(softmax(v), softmax(v + 123.456), atol=1e-12)

    def test_empty_vector_rejected(self):
        with pytest.raises(ShapeError):
            softmax(np.array([]))

    def test_normalization_with_large_entries(self, rng_np):
        # magnitudes up to 700 must not overflow thanks to max-subtraction;
        # entries can underflow to +0.0 when the spread exceeds ~745
        for _ in range(10_000):
            v = rng_np.uniform(-700, 700, size=rng_np.integers(1, 6))
            out = softmax(v)
            assert np.all(out >= 0) and np.all(np.isfinite(out))
            assert abs(out.sum() - 1.0) <= 1e-12

    def test_entries_positive_in_normal_range(self, rng_np):
        for _ in range(100):
            out = softmax(rng_np.uniform(-20, 20, size=5))
            assert np.all(out > 0)

    @given(st.lists(st.floats(min_value=-700, max_value=700), min_size=1, max_size=8))
    @settings(max_examples=200, deadline=None)
    def test_rows_sum_to_one(self, values):
        out = softmax(np.array(values))
        assert abs(out.sum() - 1.0) <= 1e-12


class TestRelu:
    def test_definition(self):
        assert np.array_equal(relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])

    def test_all_negative(self):
        assert np.array_equal(relu(np.array([-5.0, -0.1])), [0.0, 0.0])

    def test_nonnegative_unchanged(self, rng_np):
        x = np.abs(rng_np.normal(size=(3, 4)))
        assert np.array_equal(relu(x), x)


class TestRng:
    def test_same_seed_same_draws(self):
        a = rng_uniform(RngStream(99), 0.0, 1.0, 32)
        b = rng_uniform(RngStream(99), 0.0, 1.0, 32)
        assert np.array_equal(a, b)

    def test_zero_draws(self):
        assert rng_uniform(RngStream(1), 0.0, 1.0, 0).shape == (0,)

    def test_sample_mean(self):
        draws = rng_uniform(RngStream(7), 0.0, 1.0, 100_000)
        assert abs(draws.mean() - 0.5) < 0.01
        assert draws.min() >= 0.0 and draws.max() < 1.0

    def test_bad_bounds(self):
        with pytest.raises(ArgumentError):
            rng_uniform(RngStream(0), 1.0, 1.0, 4)

    def test_negative_seed_rejected(self):
        with pytest.raises(ArgumentError):
            RngStream(-1)


def test_row_major_roundtrip(rng_np):
    t = rng_np.normal(size=(5, 7))
    assert np.array_equal(t.T.T, t)
    # flat index of (i, j) in an m x n array is i*n + j
    flat = t.ravel()
    assert flat[2 * 7 + 3] == t[2, 3]


def test_tensor_rejects_nonfinite():
    with pytest.raises(ArgumentError):
        tensor([1.0, float("nan")])
    with pytest.raises(ArgumentError):
        tensor([float("inf")])
