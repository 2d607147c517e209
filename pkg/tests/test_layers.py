import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdcheck import assert_grads_match, numerical_grad
from longtail.errors import ArgumentError, ShapeError
from longtail.layers import (Conv1d, Dense, GruLayer, WindowShape, dropout,
                             dropout_backward, gapped_window_shapes, global_maxpool,
                             global_maxpool_backward, maxpool1d, maxpool1d_backward)
from longtail.numeric import RngStream


class TestWindowShapes:
    def test_one_gap_size_four(self):
        assert [s.label for s in gapped_window_shapes(1, 4)] == ["OXOO", "OOXO"]

    def test_two_gap_size_four(self):
        assert [s.label for s in gapped_window_shapes(2, 4)] == ["OXXO"]

    def test_one_gap_size_three(self):
        assert [s.label for s in gapped_window_shapes(1, 3)] == ["OXO"]

    def test_count_formula(self):
        for size in range(2, 9):
            for gap in range(1, size):
                shapes = gapped_window_shapes(gap, size)
                assert len(shapes) == size - gap - 1

    def test_shape_invariants(self):
        for size in range(3, 9):
            for gap in range(1, size - 1):
                for shape in gapped_window_shapes(gap, size):
                    inactive = [p for p, on in enumerate(shape.mask) if not on]
                    assert len(inactive) == gap
                    assert inactive == list(range(inactive[0], inactive[0] + gap))
                    assert shape.mask[0] and shape.mask[-1]

    def test_bad_arguments(self):
        for gap, size in ((0, 4), (4, 4), (5, 4), (-1, 3)):
            with pytest.raises(ArgumentError):
                gapped_window_shapes(gap, size)

    def test_plain_window(self):
        shape = WindowShape.plain(3)
        assert shape.mask == (True, True, True)
        assert shape.gap == 0

    def test_invalid_mask_rejected(self):
        with pytest.raises(ArgumentError):
            WindowShape(4, (False, True, True, True), 1)   # endpoint deactivated
        with pytest.raises(ArgumentError):
            WindowShape(5, (True, False, True, False, True), 2)   # split run

    @given(st.integers(min_value=2, max_value=8))
    @settings(deadline=None)
    def test_counts_over_all_gaps(self, size):
        for gap in range(1, size):
            assert len(gapped_window_shapes(gap, size)) == size - gap - 1


def dense_conv_oracle(x, full_kernel, bias):
    """Naive dense convolution with a full-width kernel, pre-activation."""
    seq_len, _ = x.shape
    filters, width, _ = full_kernel.shape
    out = np.zeros((seq_len - width + 1, filters))
    for p in range(out.shape[0]):
        for f in range(filters):
            out[p, f] = bias[f] + (x[p:p + width] * full_kernel[f]).sum()
    return out


def masked_full_kernel(conv):
    """Expand the compact kernel to full window width with zero columns."""
    full = np.zeros((conv.filters, conv.window.size, conv.in_dim))
    for rank, offset in enumerate(conv.window.active_offsets):
        full[:, offset, :] = conv.kernel[:, rank, :]
    return full


class TestConv1d:
    def test_output_length(self):
        conv = Conv1d(WindowShape.plain(4), 3, 2, RngStream(0))
        out, _ = conv.forward(np.random.default_rng(0).normal(size=(100, 3)))
        assert out.shape == (97, 2)

    def test_identity_kernel(self):
        conv = Conv1d(WindowShape.plain(1), 2, 1, RngStream(0))
        conv.kernel[:] = 0.0
        conv.kernel[0, 0, 0] = 1.0
        x = np.abs(np.random.default_rng(1).normal(size=(6, 2)))
        out, _ = conv.forward(x)
        assert np.allclose(out[:, 0], x[:, 0])

    def test_gapped_equals_masked_dense(self, rng_np):
        for shape in gapped_window_shapes(1, 3) + gapped_window_shapes(1, 4) + \
                gapped_window_shapes(2, 4):
            conv = Conv1d(shape, 4, 3, RngStream(7))
            x = rng_np.normal(size=(9, 4))
            _, cache = conv.forward(x)
            oracle = dense_conv_oracle(x, masked_full_kernel(conv), conv.bias)
            assert np.abs(cache["pre"] - oracle).max() <= 1e-10

    def test_too_short_input(self):
        conv = Conv1d(WindowShape.plain(4), 2, 1, RngStream(0))
        with pytest.raises(ShapeError):
            conv.forward(np.zeros((3, 2)))

    def test_zero_upstream_zero_grads(self, rng_np):
        conv = Conv1d(WindowShape.plain(3), 4, 2, RngStream(1))
        x = rng_np.normal(size=(8, 4))
        out, cache = conv.forward(x)
        grads = conv.backward(np.zeros_like(out), cache)
        for key in ("kernel", "bias", "input"):
            assert np.all(grads[key] == 0.0)

    def test_gradients_match_finite_differences(self, rng_np):
        shapes = [WindowShape.plain(2), WindowShape.plain(3), WindowShape.plain(4)]
        shapes += gapped_window_shapes(1, 3) + gapped_window_shapes(1, 4)
        shapes += gapped_window_shapes(2, 4)
        for shape in shapes:
            conv = Conv1d(shape, 5, 3, RngStream(13))
            x = rng_np.normal(size=(8, 5))
            out, cache = conv.forward(x)
            # keep pre-activations away from the ReLU kink
            while np.abs(cache["pre"]).min() < 1e-6:
                x += rng_np.normal(scale=1e-3, size=x.shape)
                out, cache = conv.forward(x)
            upstream = rng_np.normal(size=out.shape)
            grads = conv.backward(upstream, cache)

            def loss(target=None):
                y, _ = conv.forward(x)
                return float((y * upstream).sum())

            for pname, tensor in (("kernel", conv.kernel), ("bias", conv.bias),
                                  ("input", x)):
                numeric = numerical_grad(lambda: loss(), tensor)
                assert_grads_match(grads[pname], numeric, what=f"{shape.label}/{pname}")

    def test_gapped_input_grad_zero_under_mask(self, rng_np):
        # with T == window size there is a single output position, so input
        # rows under deactivated offsets are never touched
        shape = gapped_window_shapes(2, 4)[0]   # OXXO
        conv = Conv1d(shape, 3, 2, RngStream(3))
        x = np.abs(rng_np.normal(size=(4, 3))) + 0.1
        conv.bias[:] = 10.0   # keep ReLU active
        out, cache = conv.forward(x)
        grads = conv.backward(np.ones_like(out), cache)
        assert np.all(grads["input"][1] == 0.0)
        assert np.all(grads["input"][2] == 0.0)
        assert np.any(grads["input"][0] != 0.0)

    def test_batched_matches_single(self, rng_np):
        conv = Conv1d(WindowShape.plain(3), 4, 2, RngStream(5))
        x = rng_np.normal(size=(3, 9, 4))
        batched, _ = conv.forward(x)
        for b in range(3):
            single, _ = conv.forward(x[b])
            assert np.allclose(batched[b], single, atol=1e-14)


class TestMaxPool:
    def test_length_arithmetic(self):
        out, _ = maxpool1d(np.random.default_rng(0).normal(size=(97, 2)), 4, 4)
        assert out.shape == (24, 2)

    def test_constant_input_tie_rule(self):
        out, pos = maxpool1d(np.ones((8, 3)), 4, 4)
        assert np.all(out == 1.0)
        assert np.array_equal(pos[:, 0], [0, 4])

    def test_hand_example(self):
        x = np.array([1.0, 3.0, 2.0, 0.0, 5.0, 4.0, 4.0, 4.0])[:, None]
        out, pos = maxpool1d(x, 4, 4)
        assert np.array_equal(out[:, 0], [3.0, 5.0])
        assert np.array_equal(pos[:, 0], [1, 4])

    def test_too_short(self):
        with pytest.raises(ShapeError):
            maxpool1d(np.zeros((3, 1)), 4, 4)

    def test_backward_scatters_to_argmax_only(self, rng_np):
        x = rng_np.normal(size=(2, 11, 3))
        out, pos = maxpool1d(x, 4, 4)
        upstream = rng_np.normal(size=out.shape)
        dx = maxpool1d_backward(upstream, pos, 11)
        assert dx.shape == x.shape
        assert dx.sum() == pytest.approx(upstream.sum(), rel=1e-12)
        nonzero = np.argwhere(dx != 0)
        flat_pos = {(b, int(p), f) for b in range(2) for t in range(out.shape[1])
                    for f in range(3) for p in [pos[b, t, f]]}
        for b, t, f in nonzero:
            assert (b, t, f) in flat_pos

    def test_gradient_matches_finite_differences(self, rng_np):
        x = rng_np.normal(size=(9, 2))
        out, pos = maxpool1d(x, 4, 4)
        upstream = rng_np.normal(size=out.shape)

        def loss():
            y, _ = maxpool1d(x, 4, 4)
            return float((y * upstream).sum())

        dx = maxpool1d_backward(upstream, pos, 9)
        assert_grads_match(dx, numerical_grad(loss, x), what="maxpool/input")


class TestGlobalMaxPool:
    def test_single_timestep_identity(self):
        x = np.array([[1.0, -2.0, 3.0]])
        out, _ = global_maxpool(x)
        assert np.array_equal(out, x[0])

    def test_negative_column(self):
        out, _ = global_maxpool(np.array([[-3.0], [-1.0], [-2.0]]))
        assert out[0] == -1.0

    def test_random_matches_bruteforce(self, rng_np):
        x = rng_np.normal(size=(7, 3))
        out, _ = global_maxpool(x)
        assert np.array_equal(out, x.max(axis=0))

    def test_empty_rejected(self):
        with pytest.raises(ShapeError):
            global_maxpool(np.zeros((0, 3)))

    def test_backward(self, rng_np):
        x = rng_np.normal(size=(4, 7, 3))
        out, pos = global_maxpool(x)
        upstream = rng_np.normal(size=out.shape)

        def loss():
            y, _ = global_maxpool(x)
            return float((y * upstream).sum())

        dx = global_maxpool_backward(upstream, pos, 7)
        assert_grads_match(dx, numerical_grad(loss, x), what="globalpool/input")


class TestGru:
    def test_zero_weights_zero_states(self):
        gru = GruLayer(3, 2, RngStream(0))
        for name in gru.PARAM_NAMES:
            getattr(gru, name)[:] = 0.0
        out, _ = gru.forward(np.random.default_rng(0).normal(size=(5, 3)))
        assert np.all(out == 0.0)

    def test_saturated_update_gate(self):
        # z ~ 1 makes the state jump straight to the candidate value
        gru = GruLayer(1, 1, RngStream(0))
        for name in gru.PARAM_NAMES:
            getattr(gru, name)[:] = 0.0
        gru.b_z[:] = 50.0
        gru.W_h[:] = 0.7
        gru.b_h[:] = 0.2
        x = np.array([[0.9]])
        out, _ = gru.forward(x)
        assert out[0, 0] == pytest.approx(np.tanh(0.9 * 0.7 + 0.2), abs=1e-9)

    def test_matches_scalar_loop_oracle(self, rng_np):
        gru = GruLayer(3, 2, RngStream(21))
        x = rng_np.normal(size=(5, 3))
        out, _ = gru.forward(x)

        def sig(v):
            return 1.0 / (1.0 + np.exp(-v))

        h = np.zeros(2)
        for t in range(5):
            expect = np.zeros(2)
            z = np.zeros(2)
            r = np.zeros(2)
            for u in range(2):
                z[u] = sig(x[t] @ gru.W_z[:, u] + h @ gru.U_z[:, u] + gru.b_z[u])
                r[u] = sig(x[t] @ gru.W_r[:, u] + h @ gru.U_r[:, u] + gru.b_r[u])
            for u in range(2):
                hh = np.tanh(x[t] @ gru.W_h[:, u] + (r * h) @ gru.U_h[:, u] + gru.b_h[u])
                expect[u] = (1 - z[u]) * h[u] + z[u] * hh
            assert np.allclose(out[t], expect, atol=1e-12)
            h = expect

    def test_zero_upstream_zero_grads(self, rng_np):
        gru = GruLayer(4, 3, RngStream(2))
        x = rng_np.normal(size=(6, 4))
        out, cache = gru.forward(x)
        grads = gru.backward(np.zeros_like(out), cache)
        for name in gru.PARAM_NAMES + ("input",):
            assert np.all(grads[name] == 0.0)

    def test_gradients_match_finite_differences(self, rng_np):
        gru = GruLayer(4, 3, RngStream(17))
        x = rng_np.normal(size=(6, 4))
        out, cache = gru.forward(x)
        upstream = rng_np.normal(size=out.shape)
        grads = gru.backward(upstream, cache)

        def loss():
            y, _ = gru.forward(x)
            return float((y * upstream).sum())

        for name in gru.PARAM_NAMES:
            numeric = numerical_grad(loss, getattr(gru, name))
            assert_grads_match(grads[name], numeric, what=f"gru/{name}")
        assert_grads_match(grads["input"], numerical_grad(loss, x), what="gru/input")

    def test_dimension_mismatch(self):
        gru = GruLayer(3, 2, RngStream(0))
        with pytest.raises(ShapeError):
            gru.forward(np.zeros((4, 5)))

    def test_causality(self, rng_np):
        # upstream at step t must not produce gradient w.r.t. later inputs
        gru = GruLayer(2, 2, RngStream(9))
        x = rng_np.normal(size=(5, 2))
        out, cache = gru.forward(x)
        upstream = np.zeros_like(out)
        upstream[2] = 1.0
        grads = gru.backward(upstream, cache)
        assert np.all(grads["input"][3:] == 0.0)
        assert np.any(grads["input"][:3] != 0.0)


class TestDense:
    def test_zero_weights(self):
        dense = Dense(3, 2, RngStream(0))
        dense.weights[:] = 0.0
        out, _ = dense.forward(np.array([1.0, 2.0, 3.0]))
        assert np.array_equal(out, np.zeros(2))

    def test_identity(self):
        dense = Dense(3, 3, RngStream(0))
        dense.weights[:] = np.eye(3)
        x = np.array([1.0, -2.0, 0.5])
        out, _ = dense.forward(x)
        assert np.allclose(out, x)

    def test_gradients(self, rng_np):
        dense = Dense(4, 3, RngStream(11))
        x = rng_np.normal(size=(2, 4))
        out, cache = dense.forward(x)
        upstream = rng_np.normal(size=out.shape)
        grads = dense.backward(upstream, cache)

        def loss():
            y, _ = dense.forward(x)
            return float((y * upstream).sum())

        assert_grads_match(grads["weights"], numerical_grad(loss, dense.weights), what="dense/weights")
        assert_grads_match(grads["bias"], numerical_grad(loss, dense.bias), what="dense/bias")
        assert_grads_match(grads["input"], numerical_grad(loss, x), what="dense/input")


class TestDropout:
    def test_eval_identity(self, rng_np):
        x = rng_np.normal(size=(5, 4))
        out, mask = dropout(x, 0.5, "eval", RngStream(0))
        assert out is x or np.array_equal(out, x)
        assert mask is None

    def test_zero_ratio_identity(self, rng_np):
        x = rng_np.normal(size=(5, 4))
        out, mask = dropout(x, 0.0, "train", RngStream(0))
        assert np.array_equal(out, x)
        assert mask is None

    def test_inverted_scaling_statistics(self):
        rng = RngStream(31)
        total = np.zeros(100)
        reps = 10_000
        for _ in range(reps):
            out, _ = dropout(np.ones(100), 0.2, "train", rng)
            total += out
        assert np.abs(total / reps - 1.0).max() < 0.02

    def test_bad_ratio(self):
        with pytest.raises(ArgumentError):
            dropout(np.ones(3), 1.0, "train", RngStream(0))
        with pytest.raises(ArgumentError):
            dropout(np.ones(3), -0.1, "train", RngStream(0))

    def test_backward_applies_same_mask(self, rng_np):
        x = rng_np.normal(size=(6, 3))
        out, mask = dropout(x, 0.4, "train", RngStream(5))
        upstream = rng_np.normal(size=x.shape)
        dx = dropout_backward(upstream, mask, 0.4)
        assert np.array_equal(dx == 0.0, ~mask)
        assert np.allclose(dx[mask], upstream[mask] / 0.6)


class TestInitialization:
    def test_seeded_init_reproducible(self):
        a = Conv1d(WindowShape.plain(3), 5, 4, RngStream(42))
        b = Conv1d(WindowShape.plain(3), 5, 4, RngStream(42))
        assert np.array_equal(a.kernel, b.kernel)
        g1 = GruLayer(4, 3, RngStream(7))
        g2 = GruLayer(4, 3, RngStream(7))
        for name in g1.PARAM_NAMES:
            assert np.array_equal(getattr(g1, name), getattr(g2, name))

    def test_glorot_bounds_and_zero_biases(self):
        conv = Conv1d(WindowShape.plain(4), 6, 8, RngStream(3))
        width = 4
        limit = np.sqrt(6.0 / (width * 6 + width * 8))
        assert np.all(np.abs(conv.kernel) < limit)
        assert np.all(conv.bias == 0.0)
        dense = Dense(10, 3, RngStream(4))
        limit = np.sqrt(6.0 / 13)
        assert np.all(np.abs(dense.weights) < limit)
        assert np.all(dense.bias == 0.0)
