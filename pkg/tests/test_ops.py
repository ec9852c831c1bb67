import numpy as np
import pytest

from conftest import finite_difference, naive_conv2d, random_kernel, rel_err
from ghostlayer.errors import ConfigurationError
from ghostlayer.ops import (
    ConvKernel,
    conv2d_backward_input,
    conv2d_forward,
    pool2d_backward,
    pool2d_forward,
    relu_backward,
    relu_forward,
)


def t4(values, shape):
    return np.asarray(values, dtype=np.float32).reshape(shape)


class TestConvForward:
    def test_scalar_kernel(self):
        x = np.ones((1, 1, 3, 3), dtype=np.float32)
        k = ConvKernel(t4([2.0], (1, 1, 1, 1)), np.zeros(1, np.float32))
        out = conv2d_forward(x, k)
        assert out.shape == (1, 1, 3, 3)
        assert np.array_equal(out, np.full((1, 1, 3, 3), 2.0, np.float32))

    def test_identity_kernel(self, rng):
        x = rng.standard_normal((1, 1, 5, 5)).astype(np.float32)
        w = np.zeros((1, 1, 3, 3), np.float32)
        w[0, 0, 1, 1] = 1.0
        out = conv2d_forward(x, ConvKernel(w, np.zeros(1, np.float32)), pad=1)
        assert np.allclose(out, x, atol=0)

    def test_matches_naive_oracle(self, rng):
        x = rng.standard_normal((1, 2, 4, 4)).astype(np.float32)
        k = random_kernel(rng, 3, 2)
        out = conv2d_forward(x, k, pad=1)
        assert np.max(np.abs(out - naive_conv2d(x, k, pad=1))) < 1e-5

    def test_oracle_randomized_shapes(self, rng):
        for _ in range(100):
            b = int(rng.integers(1, 3))
            c = int(rng.integers(1, 5))
            o = int(rng.integers(1, 5))
            kh = int(rng.integers(1, 4))
            kw = int(rng.integers(1, 4))
            pad = int(rng.integers(0, 2))
            stride = int(rng.integers(1, 3))
            h = int(rng.integers(max(kh - 2 * pad, 1), 9))
            w = int(rng.integers(max(kw - 2 * pad, 1), 9))
            x = rng.standard_normal((b, c, h, w)).astype(np.float32)
            k = random_kernel(rng, o, c, kh, kw)
            out = conv2d_forward(x, k, pad=pad, stride=stride)
            assert np.max(np.abs(out - naive_conv2d(x, k, pad=pad, stride=stride))) < 1e-5

    def test_linearity(self, rng):
        k = random_kernel(rng, 3, 2, bias=False)
        x = rng.standard_normal((1, 2, 5, 5)).astype(np.float32)
        y = rng.standard_normal((1, 2, 5, 5)).astype(np.float32)
        a, b = np.float32(1.7), np.float32(-0.4)
        lhs = conv2d_forward(a * x + b * y, k, pad=1)
        rhs = a * conv2d_forward(x, k, pad=1) + b * conv2d_forward(y, k, pad=1)
        assert np.max(np.abs(lhs - rhs)) < 1e-5

    def test_channel_mismatch_raises(self, rng):
        x = rng.standard_normal((1, 2, 4, 4)).astype(np.float32)
        k = random_kernel(rng, 3, 4)
        with pytest.raises(ConfigurationError, match="channels"):
            conv2d_forward(x, k)

    def test_deterministic(self, rng):
        x = rng.standard_normal((1, 3, 6, 6)).astype(np.float32)
        k = random_kernel(rng, 4, 3)
        a = conv2d_forward(x, k, pad=1)
        b = conv2d_forward(x, k, pad=1)
        assert np.array_equal(a, b)


class TestConvBackward:
    def test_zero_upstream(self, rng):
        k = random_kernel(rng, 3, 2)
        g = np.zeros((1, 3, 4, 4), np.float32)
        grad = conv2d_backward_input(g, k, (1, 2, 4, 4), pad=1)
        assert np.array_equal(grad, np.zeros((1, 2, 4, 4), np.float32))

    def test_scalar_chain_rule(self, rng):
        w = np.float32(2.5)
        k = ConvKernel(t4([w], (1, 1, 1, 1)), np.zeros(1, np.float32))
        g = rng.standard_normal((1, 1, 4, 4)).astype(np.float32)
        grad = conv2d_backward_input(g, k, (1, 1, 4, 4))
        assert np.allclose(grad, w * g, atol=1e-6)

    def test_finite_difference(self, rng):
        k = random_kernel(rng, 3, 2)
        x = rng.standard_normal((1, 2, 5, 5)).astype(np.float32)
        g = rng.standard_normal((1, 3, 5, 5)).astype(np.float32)

        def f(xi):
            # float64 naive forward keeps the FD quotient clean
            return float(np.sum(naive_conv2d(xi, k, pad=1) * g))

        grad = conv2d_backward_input(g, k, x.shape, pad=1)
        coords = rng.choice(x.size, size=12, replace=False)
        fd = finite_difference(f, x, coords)
        an = grad.reshape(-1)[coords]
        assert np.max(rel_err(an, fd)) < 1e-3

    def test_shape_mismatch_raises(self, rng):
        k = random_kernel(rng, 3, 2)
        g = np.zeros((1, 3, 5, 5), np.float32)
        with pytest.raises(ConfigurationError):
            conv2d_backward_input(g, k, (1, 2, 4, 4), pad=0)


class TestRelu:
    def test_definition(self):
        x = t4([-1.0, 0.0, 2.0], (1, 1, 1, 3))
        assert np.array_equal(relu_forward(x), t4([0.0, 0.0, 2.0], (1, 1, 1, 3)))

    def test_backward_gate(self):
        saved = t4([-1.0, 0.0, 2.0], (1, 1, 1, 3))
        g = t4([5.0, 5.0, 5.0], (1, 1, 1, 3))
        assert np.array_equal(relu_backward(g, saved), t4([0.0, 0.0, 5.0], (1, 1, 1, 3)))

    def test_abs_identity(self, rng):
        x = rng.standard_normal((1, 2, 4, 4)).astype(np.float32)
        assert np.allclose(relu_forward(x) + relu_forward(-x), np.abs(x), atol=0)

    def test_shape_mismatch(self):
        with pytest.raises(ConfigurationError):
            relu_backward(np.zeros((1, 1, 2, 2), np.float32), np.zeros((1, 1, 2, 3), np.float32))


class TestPool:
    def test_block_values(self):
        x = t4([1.0, 2.0, 3.0, 4.0], (1, 1, 2, 2))
        out_max, _ = pool2d_forward(x, "max")
        out_avg, _ = pool2d_forward(x, "average")
        assert out_max[0, 0, 0, 0] == 4.0
        assert out_avg[0, 0, 0, 0] == 2.5

    def test_max_backward_routing(self):
        x = t4([1.0, 2.0, 3.0, 4.0], (1, 1, 2, 2))
        _, ctx = pool2d_forward(x, "max")
        grad = pool2d_backward(np.ones((1, 1, 1, 1), np.float32), ctx)
        assert np.array_equal(grad, t4([0.0, 0.0, 0.0, 1.0], (1, 1, 2, 2)))

    @pytest.mark.parametrize("mode", ["max", "average"])
    def test_finite_difference(self, rng, mode):
        x = rng.standard_normal((1, 1, 8, 8)).astype(np.float32)
        g = rng.standard_normal((1, 1, 4, 4)).astype(np.float32)

        def f(xi):
            out, _ = pool2d_forward(xi, mode)
            return float(np.sum(out.astype(np.float64) * g))

        _, ctx = pool2d_forward(x, mode)
        grad = pool2d_backward(g, ctx)
        coords = rng.choice(x.size, size=12, replace=False)
        fd = finite_difference(f, x, coords)
        an = grad.reshape(-1)[coords]
        # max pooling is only piecewise linear; keep clear of ties
        assert np.max(rel_err(an, fd)) < 1e-3

    def test_odd_extent_uses_floor(self, rng):
        x = rng.standard_normal((1, 2, 5, 7)).astype(np.float32)
        out, ctx = pool2d_forward(x, "average")
        assert out.shape == (1, 2, 2, 3)
        grad = pool2d_backward(np.ones_like(out), ctx)
        assert grad.shape == x.shape
        assert np.all(grad[:, :, 4, :] == 0)  # dropped trailing row

    def test_bad_mode(self):
        with pytest.raises(ConfigurationError):
            pool2d_forward(np.zeros((1, 1, 2, 2), np.float32), "median")
