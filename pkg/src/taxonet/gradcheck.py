"""Finite-difference gradient oracle for the layer primitives.

``grad_check`` compares an analytic gradient against central differences,
coordinate by coordinate, at 64-bit precision. ``run_suite`` sweeps every
layer over many seeds and is what the ``gradcheck`` CLI subcommand and the
acceptance tests run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import layers
from .errors import ValidationError
from .rng import derive_seed

DEFAULT_EPS = 1e-5
DEFAULT_TOLERANCE = 1e-5


def grad_check(f, x: np.ndarray, eps: float = DEFAULT_EPS) -> float:
    """Max relative error between f's analytic gradient and central differences.

    ``f(x)`` must return ``(scalar_value, gradient_wrt_x)``. The relative
    error denominator is ``max(|analytic|, |numeric|, 1e-8)`` per coordinate.
    Requires float64 input; float32 noise would swamp the comparison.
    """
    if x.dtype != np.float64:
        raise ValidationError(f"grad_check requires float64 input, got {x.dtype}")
    _, analytic = f(x)
    analytic = np.asarray(analytic, dtype=np.float64)
    if analytic.shape != x.shape:
        raise ValidationError(
            f"analytic gradient shape {analytic.shape} != input shape {x.shape}"
        )
    worst = 0.0
    flat = x.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        plus, _ = f(x)
        flat[i] = orig - eps
        minus, _ = f(x)
        flat[i] = orig
        numeric = (plus - minus) / (2 * eps)
        a = analytic.reshape(-1)[i]
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, float(err))
    return worst


def _away_from_zero(arr: np.ndarray, margin: float = 0.05) -> np.ndarray:
    """Push values out of (-margin, margin) so ReLU/max kinks stay away from eps."""
    sign = np.where(arr >= 0, 1.0, -1.0)
    return arr + sign * margin


def _separate_pool_windows(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Jitter until no 2x2 pooling window holds two values within 1e-3."""
    n, c, h, w = x.shape
    for _ in range(50):
        win = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
        win = win.reshape(-1, 4)
        s = np.sort(win, axis=1)
        if np.min(np.diff(s, axis=1)) > 1e-3:
            return x
        x = x + rng.normal(0, 0.1, size=x.shape)
    raise RuntimeError("could not separate pooling windows")


def _projection_scalar(forward, backward, extract, seed):
    """Build f(x) = sum(forward(x) * R) whose gradient is backward(R)."""
    holder = {}

    def f(x):
        out, cache = forward(x)
        if "R" not in holder:
            holder["R"] = np.random.default_rng(seed).normal(size=out.shape)
        r = holder["R"]
        value = float((out * r).sum())
        grads = backward(r, cache)
        return value, extract(grads)

    return f


@dataclass
class GradCheckCase:
    op: str
    wrt: str
    seed: int
    max_rel_err: float


def _conv_cases(seed: int, eps: float):
    rng = np.random.default_rng(derive_seed(seed, 1))
    x = rng.normal(size=(2, 2, 5, 5))
    w = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=(3,))
    proj = derive_seed(seed, 2)
    for stride, pad in ((1, 0), (1, 1), (2, 1)):
        fx = _projection_scalar(
            lambda t: layers.conv2d_forward(t, w, b, stride, pad),
            layers.conv2d_backward, lambda g: g[0], proj)
        yield GradCheckCase("conv2d", f"input(s{stride},p{pad})", seed, grad_check(fx, x.copy(), eps))
        fw = _projection_scalar(
            lambda t: layers.conv2d_forward(x, t, b, stride, pad),
            layers.conv2d_backward, lambda g: g[1], proj)
        yield GradCheckCase("conv2d", f"kernels(s{stride},p{pad})", seed, grad_check(fw, w.copy(), eps))
        fb = _projection_scalar(
            lambda t: layers.conv2d_forward(x, w, t, stride, pad),
            layers.conv2d_backward, lambda g: g[2], proj)
        yield GradCheckCase("conv2d", f"bias(s{stride},p{pad})", seed, grad_check(fb, b.copy(), eps))


def _dense_cases(seed: int, eps: float):
    rng = np.random.default_rng(derive_seed(seed, 3))
    x = rng.normal(size=(3, 4))
    w = rng.normal(size=(4, 6))
    b = rng.normal(size=(6,))
    proj = derive_seed(seed, 4)
    fx = _projection_scalar(lambda t: layers.dense_forward(t, w, b),
                            layers.dense_backward, lambda g: g[0], proj)
    yield GradCheckCase("dense", "input", seed, grad_check(fx, x.copy(), eps))
    fw = _projection_scalar(lambda t: layers.dense_forward(x, t, b),
                            layers.dense_backward, lambda g: g[1], proj)
    yield GradCheckCase("dense", "weights", seed, grad_check(fw, w.copy(), eps))
    fb = _projection_scalar(lambda t: layers.dense_forward(x, w, t),
                            layers.dense_backward, lambda g: g[2], proj)
    yield GradCheckCase("dense", "bias", seed, grad_check(fb, b.copy(), eps))


def _relu_case(seed: int, eps: float):
    rng = np.random.default_rng(derive_seed(seed, 5))
    x = _away_from_zero(rng.normal(size=(4, 7)))
    f = _projection_scalar(layers.relu_forward,
                           lambda g, cache: (layers.relu_backward(g, cache),),
                           lambda g: g[0], derive_seed(seed, 6))
    yield GradCheckCase("relu", "input", seed, grad_check(f, x.copy(), eps))


def _maxpool_case(seed: int, eps: float):
    rng = np.random.default_rng(derive_seed(seed, 7))
    x = _separate_pool_windows(rng.normal(size=(2, 3, 4, 4)), rng)
    f = _projection_scalar(layers.maxpool2_forward,
                           lambda g, cache: (layers.maxpool2_backward(g, cache),),
                           lambda g: g[0], derive_seed(seed, 8))
    yield GradCheckCase("maxpool2", "input", seed, grad_check(f, x.copy(), eps))


def _softmax_ce_case(seed: int, eps: float):
    rng = np.random.default_rng(derive_seed(seed, 9))
    logits = rng.normal(size=(3, 5))
    targets = rng.integers(0, 5, size=3)

    def f(t):
        return layers.softmax_cross_entropy(t, targets)

    yield GradCheckCase("softmax_cross_entropy", "logits", seed, grad_check(f, logits.copy(), eps))


def run_suite(seeds=range(20), eps: float = DEFAULT_EPS) -> list[GradCheckCase]:
    """Gradient-check every layer primitive for each seed."""
    cases: list[GradCheckCase] = []
    for seed in seeds:
        for gen in (_conv_cases, _dense_cases, _relu_case, _maxpool_case,
                    _softmax_ce_case):
            cases.extend(gen(seed, eps))
    return cases


def suite_max_error(cases) -> float:
    return max(c.max_rel_err for c in cases)
