import numpy as np
import pytest

from taxonet import layers
from taxonet.errors import (NonFiniteError, NonFiniteGradientError,
                            ValidationError)


class TestConv2d:
    def test_identity_kernel(self):
        x = np.random.default_rng(0).normal(size=(1, 1, 3, 3))
        w = np.ones((1, 1, 1, 1))
        b = np.zeros(1)
        y, _ = layers.conv2d_forward(x, w, b, stride=1, pad=0)
        assert np.array_equal(y, x)

    def test_all_ones_sum(self):
        x = np.ones((1, 1, 4, 4))
        w = np.ones((1, 1, 3, 3))
        y, _ = layers.conv2d_forward(x, w, np.zeros(1))
        assert y.shape == (1, 1, 2, 2)
        assert np.all(y == 9.0)

    def test_output_shape_padded(self):
        x = np.zeros((2, 3, 8, 8), dtype=np.float32)
        w = np.zeros((5, 3, 3, 3), dtype=np.float32)
        y, _ = layers.conv2d_forward(x, w, np.zeros(5, dtype=np.float32),
                                     stride=1, pad=1)
        assert y.shape == (2, 5, 8, 8)

    def test_strided_shape(self):
        x = np.zeros((1, 2, 9, 9))
        w = np.zeros((4, 2, 3, 3))
        y, _ = layers.conv2d_forward(x, w, np.zeros(4), stride=2, pad=1)
        # floor((9 + 2 - 3)/2) + 1 = 5
        assert y.shape == (1, 4, 5, 5)

    def test_channel_mismatch(self):
        with pytest.raises(ValidationError, match="channel"):
            layers.conv2d_forward(np.zeros((1, 2, 4, 4)), np.zeros((1, 3, 3, 3)),
                                  np.zeros(1))

    def test_kernel_too_large(self):
        with pytest.raises(ValidationError, match="larger"):
            layers.conv2d_forward(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 3, 3)),
                                  np.zeros(1))

    def test_non_finite_input(self):
        x = np.full((1, 1, 3, 3), np.nan)
        with pytest.raises(NonFiniteError):
            layers.conv2d_forward(x, np.ones((1, 1, 1, 1)), np.zeros(1))


class TestMaxPool2:
    def test_max_of_four(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
        y, _ = layers.maxpool2_forward(x)
        assert y.reshape(()) == 4.0

    def test_tie_routes_first_row_major(self):
        x = np.ones((1, 1, 2, 2))
        y, cache = layers.maxpool2_forward(x)
        assert np.all(y == 1.0)
        dx = layers.maxpool2_backward(np.ones((1, 1, 1, 1)), cache)
        expected = np.array([[1.0, 0.0], [0.0, 0.0]]).reshape(1, 1, 2, 2)
        assert np.array_equal(dx, expected)

    def test_shape(self):
        y, _ = layers.maxpool2_forward(np.zeros((1, 2, 4, 4)))
        assert y.shape == (1, 2, 2, 2)

    def test_odd_input_rejected(self):
        with pytest.raises(ValidationError, match="even"):
            layers.maxpool2_forward(np.zeros((1, 1, 3, 4)))

    def test_output_bounded_by_input(self, rng):
        x = rng.normal(size=(2, 3, 6, 8))
        y, _ = layers.maxpool2_forward(x)
        assert y.max() <= x.max()
        assert y.min() >= x.min()


class TestRelu:
    def test_basic(self):
        y, _ = layers.relu_forward(np.array([-1.0, 0.0, 2.0]))
        assert np.array_equal(y, [0.0, 0.0, 2.0])

    def test_all_negative(self):
        y, _ = layers.relu_forward(np.array([-3.0, -0.5]))
        assert np.all(y == 0.0)

    def test_gradient_zero_at_zero(self):
        x = np.array([-1.0, 0.0, 2.0])
        _, cache = layers.relu_forward(x)
        dx = layers.relu_backward(np.ones(3), cache)
        assert np.array_equal(dx, [0.0, 0.0, 1.0])


class TestDense:
    def test_identity_weights(self, rng):
        x = rng.normal(size=(4, 5))
        y, _ = layers.dense_forward(x, np.eye(5), np.zeros(5))
        assert np.allclose(y, x)

    def test_zero_weights_bias_rows(self):
        b = np.array([1.0, 2.0, 3.0])
        y, _ = layers.dense_forward(np.ones((4, 10)), np.zeros((10, 3)), b)
        assert np.array_equal(y, np.tile(b, (4, 1)))

    def test_shape(self):
        y, _ = layers.dense_forward(np.zeros((4, 10)), np.zeros((10, 3)),
                                    np.zeros(3))
        assert y.shape == (4, 3)

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError, match="mismatch"):
            layers.dense_forward(np.zeros((4, 10)), np.zeros((9, 3)), np.zeros(3))


class TestSoftmaxCrossEntropy:
    def test_uniform_logits_ln_k(self):
        loss, _ = layers.softmax_cross_entropy(np.zeros((3, 4)),
                                               np.array([0, 1, 2]))
        assert loss == pytest.approx(np.log(4), abs=1e-12)

    def test_dominant_logit_zero_loss(self):
        logits = np.array([[100.0, 0.0, 0.0]])
        loss, _ = layers.softmax_cross_entropy(logits, np.array([0]))
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_loss_non_negative(self, rng):
        for _ in range(10):
            logits = rng.normal(size=(5, 7))
            targets = rng.integers(0, 7, size=5)
            loss, _ = layers.softmax_cross_entropy(logits, targets)
            assert loss >= 0.0

    def test_softmax_rows_sum_to_one(self, rng):
        p = layers.softmax(rng.normal(size=(20, 9)) * 10)
        assert np.abs(p.sum(axis=1) - 1.0).max() < 1e-12

    def test_target_out_of_range(self):
        with pytest.raises(ValidationError, match="range"):
            layers.softmax_cross_entropy(np.zeros((2, 3)), np.array([0, 3]))

    def test_grad_is_softmax_minus_onehot_over_n(self, rng):
        logits = rng.normal(size=(4, 3))
        targets = np.array([0, 1, 2, 1])
        _, grad = layers.softmax_cross_entropy(logits, targets)
        p = layers.softmax(logits)
        onehot = np.zeros_like(p)
        onehot[np.arange(4), targets] = 1.0
        assert np.allclose(grad, (p - onehot) / 4, atol=1e-12)


class TestSgdMomentum:
    def _param(self, value, grad):
        p = layers.Parameter("w", np.array(value, dtype=np.float64))
        p.grad[...] = grad
        return p

    def test_plain_step(self):
        p = self._param([0.0], 1.0)
        layers.sgd_momentum_step([p], lr=0.1, momentum=0.0)
        assert p.value[0] == pytest.approx(-0.1)
        assert p.grad[0] == 0.0

    def test_lr_zero_noop(self):
        p = self._param([3.5], 2.0)
        layers.sgd_momentum_step([p], lr=0.0, momentum=0.9)
        assert p.value[0] == 3.5

    def test_two_momentum_steps(self):
        # hand iteration: v1 = -0.1, w1 = -0.1; v2 = 0.9*(-0.1) - 0.1 = -0.19,
        # w2 = -0.29
        p = self._param([0.0], 1.0)
        layers.sgd_momentum_step([p], lr=0.1, momentum=0.9)
        p.grad[...] = 1.0
        layers.sgd_momentum_step([p], lr=0.1, momentum=0.9)
        assert p.value[0] == pytest.approx(-0.29)

    def test_non_finite_gradient_names_parameter(self):
        p = self._param([0.0], np.inf)
        with pytest.raises(NonFiniteGradientError, match="'w'"):
            layers.sgd_momentum_step([p], lr=0.1, momentum=0.0)

    def test_frozen_parameter_untouched(self):
        p = self._param([1.0], 5.0)
        p.frozen = True
        layers.sgd_momentum_step([p], lr=0.1, momentum=0.9)
        assert p.value[0] == 1.0
        assert p.grad[0] == 0.0


class TestHeInit:
    def test_deterministic(self):
        a = layers.he_init((10, 10), seed=3)
        b = layers.he_init((10, 10), seed=3)
        assert np.array_equal(a, b)

    def test_different_seeds_differ(self):
        a = layers.he_init((10, 10), seed=3)
        b = layers.he_init((10, 10), seed=4)
        assert not np.array_equal(a, b)

    def test_empirical_std(self):
        # fan_in 200, 1e5 samples -> std within 5% of sqrt(2/200) = 0.1
        w = layers.he_init((200, 500), seed=0, dtype=np.float64)
        assert w.std() == pytest.approx(0.1, rel=0.05)
        assert abs(w.mean()) < 0.005

    def test_conv_fan_in(self):
        # (K, C, kh, kw) -> fan_in = C*kh*kw = 2*3*3 = 18
        w = layers.he_init((64, 2, 3, 3), seed=0, dtype=np.float64)
        assert w.std() == pytest.approx(np.sqrt(2 / 18), rel=0.05)


class TestDeterminism:
    def test_forward_ops_bit_identical(self, rng):
        x = rng.normal(size=(2, 3, 8, 8))
        w = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=(4,))
        y1, _ = layers.conv2d_forward(x, w, b, pad=1)
        y2, _ = layers.conv2d_forward(x.copy(), w.copy(), b.copy(), pad=1)
        assert np.array_equal(y1, y2)
