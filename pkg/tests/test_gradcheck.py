import numpy as np
import pytest

from taxonet import layers
from taxonet.errors import ValidationError
from taxonet.gradcheck import grad_check, run_suite, suite_max_error


def test_linear_function_exact():
    # central differences are exact on linear maps, up to round-off
    a = np.array([2.0, -3.0, 0.5])

    def f(x):
        return float(a @ x), a

    err = grad_check(f, np.array([1.0, 2.0, 3.0]))
    assert err < 1e-9


def test_dense_layer_tight(rng):
    x = rng.normal(size=(3, 4))
    w = rng.normal(size=(4, 5))
    b = rng.normal(size=(5,))
    r = rng.normal(size=(3, 5))

    def f(t):
        y, cache = layers.dense_forward(t, w, b)
        dx, _, _ = layers.dense_backward(r, cache)
        return float((y * r).sum()), dx

    assert grad_check(f, x, eps=1e-5) < 1e-6


def test_conv_layer(rng):
    x = rng.normal(size=(1, 2, 5, 5))
    w = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=(3,))
    y0, _ = layers.conv2d_forward(x, w, b, pad=1)
    r = rng.normal(size=y0.shape)

    def f(t):
        y, cache = layers.conv2d_forward(t, w, b, pad=1)
        dx, _, _ = layers.conv2d_backward(r, cache)
        return float((y * r).sum()), dx

    assert grad_check(f, x, eps=1e-5) < 1e-5


def test_softmax_ce_matches_finite_differences(rng):
    logits = rng.normal(size=(3, 5))
    targets = rng.integers(0, 5, size=3)

    def f(t):
        return layers.softmax_cross_entropy(t, targets)

    assert grad_check(f, logits, eps=1e-5) < 1e-5


def test_requires_float64():
    def f(x):
        return float(x.sum()), np.ones_like(x)

    with pytest.raises(ValidationError, match="float64"):
        grad_check(f, np.ones(3, dtype=np.float32))


def test_shape_mismatch_detected():
    def f(x):
        return float(x.sum()), np.ones(2)

    with pytest.raises(ValidationError, match="shape"):
        grad_check(f, np.ones(3))


def test_suite_few_seeds_under_tolerance():
    cases = run_suite(seeds=range(3))
    assert suite_max_error(cases) < 1e-5
    ops = {c.op for c in cases}
    assert ops == {"conv2d", "dense", "relu", "maxpool2", "softmax_cross_entropy"}
