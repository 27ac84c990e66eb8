"""Forward/backward primitives for the convolutional classifier.

Every forward function returns ``(output, cache)``; the paired backward
takes the upstream gradient plus the cache and returns gradients for each
input. All math runs in the dtype of the incoming arrays (float32 for
training, float64 for gradient checking). Convolution uses
cross-correlation semantics (no kernel flip).
"""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteGradientError, ValidationError
from .rng import derive_seed
from .validation import check_ndim, require_finite


class Parameter:
    """A trainable array with its gradient and momentum buffer."""

    __slots__ = ("name", "value", "grad", "velocity", "frozen")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)
        self.velocity = np.zeros_like(value)
        self.frozen = False

    def zero_grad(self):
        self.grad[...] = 0

    def copy(self) -> "Parameter":
        p = Parameter(self.name, self.value.copy())
        p.grad = self.grad.copy()
        p.velocity = self.velocity.copy()
        p.frozen = self.frozen
        return p

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


def he_init(shape, seed: int, dtype=np.float32, scale: float = 1.0) -> np.ndarray:
    """Zero-mean Gaussian with std sqrt(2 / fan_in), deterministic per seed.

    fan_in is ``C*kh*kw`` for 4-D convolution kernels and the input width
    for 2-D dense weights.
    """
    shape = tuple(int(s) for s in shape)
    if len(shape) == 4:
        fan_in = shape[1] * shape[2] * shape[3]
    else:
        fan_in = shape[0]
    std = scale * np.sqrt(2.0 / fan_in)
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, std, size=shape).astype(dtype)


def _check_pair_dtype(a: np.ndarray, b: np.ndarray, what: str):
    if a.dtype != b.dtype:
        raise ValidationError(f"{what}: mixed dtypes {a.dtype} vs {b.dtype}")


def conv2d_forward(x, w, b, stride: int = 1, pad: int = 0):
    """3x3-style convolution via im2col.

    x: (N, C, H, W); w: (K, C, kh, kw); b: (K,). Output spatial size is
    floor((H + 2*pad - kh)/stride) + 1 (same for W).
    """
    check_ndim(x, 4, "conv2d input")
    check_ndim(w, 4, "conv2d kernels")
    check_ndim(b, 1, "conv2d bias")
    if stride < 1:
        raise ValidationError(f"conv2d stride must be >= 1, got {stride}")
    if pad < 0:
        raise ValidationError(f"conv2d pad must be >= 0, got {pad}")
    n, c, h, wdt = x.shape
    k, cw, kh, kw = w.shape
    if cw != c:
        raise ValidationError(
            f"conv2d channel mismatch: input has {c} channels, kernels expect {cw}"
        )
    if b.shape[0] != k:
        raise ValidationError(f"conv2d bias length {b.shape[0]} != kernel count {k}")
    if kh > h + 2 * pad or kw > wdt + 2 * pad:
        raise ValidationError(
            f"conv2d kernel {kh}x{kw} larger than padded input "
            f"{h + 2 * pad}x{wdt + 2 * pad}"
        )
    require_finite(x, "conv2d input")
    require_finite(w, "conv2d kernels")
    require_finite(b, "conv2d bias")
    _check_pair_dtype(x, w, "conv2d")

    h_out = (h + 2 * pad - kh) // stride + 1
    w_out = (wdt + 2 * pad - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = np.empty((n, c, kh, kw, h_out, w_out), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i : i + stride * h_out : stride,
                                  j : j + stride * w_out : stride]
    cols2 = cols.reshape(n, c * kh * kw, h_out * w_out)
    wm = w.reshape(k, c * kh * kw)
    out = np.matmul(wm, cols2) + b[:, None]
    out = out.reshape(n, k, h_out, w_out)
    cache = (x.shape, w.shape, wm, cols2, stride, pad)
    return out, cache


def conv2d_backward(grad_out, cache):
    """Gradients of conv2d w.r.t. (input, kernels, bias)."""
    x_shape, w_shape, wm, cols2, stride, pad = cache
    n, c, h, wdt = x_shape
    k, _, kh, kw = w_shape
    h_out, w_out = grad_out.shape[2], grad_out.shape[3]
    g2 = grad_out.reshape(n, k, h_out * w_out)

    db = g2.sum(axis=(0, 2))
    dwm = np.matmul(g2, cols2.transpose(0, 2, 1)).sum(axis=0)
    dw = dwm.reshape(w_shape)

    dcols2 = np.matmul(wm.T, g2)
    dcols = dcols2.reshape(n, c, kh, kw, h_out, w_out)
    dxp = np.zeros((n, c, h + 2 * pad, wdt + 2 * pad), dtype=grad_out.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + stride * h_out : stride,
                j : j + stride * w_out : stride] += dcols[:, :, i, j]
    dx = dxp[:, :, pad : pad + h, pad : pad + wdt] if pad else dxp
    return dx, dw, db


def maxpool2_forward(x):
    """2x2 non-overlapping max pooling; H and W must be even."""
    check_ndim(x, 4, "maxpool2 input")
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValidationError(f"maxpool2 requires even spatial dims, got {h}x{w}")
    # window elements ordered row-major: (0,0), (0,1), (1,0), (1,1)
    win = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(n, c, h // 2, w // 2, 4)
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, (x.shape, idx)


def maxpool2_backward(grad_out, cache):
    """Routes gradient to the argmax; ties go to the first element in row-major scan."""
    x_shape, idx = cache
    n, c, h, w = x_shape
    dwin = np.zeros((n, c, h // 2, w // 2, 4), dtype=grad_out.dtype)
    np.put_along_axis(dwin, idx[..., None], grad_out[..., None], axis=-1)
    dx = dwin.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return dx.reshape(n, c, h, w)


def relu_forward(x):
    return np.maximum(x, 0), (x > 0)


def relu_backward(grad_out, cache):
    # gradient at exactly 0 is 0 by convention
    return grad_out * cache


def dense_forward(x, w, b):
    """Affine layer: x (N, D) @ w (D, M) + b (M,)."""
    check_ndim(x, 2, "dense input")
    check_ndim(w, 2, "dense weights")
    if x.shape[1] != w.shape[0]:
        raise ValidationError(
            f"dense shape mismatch: input width {x.shape[1]} vs weights {w.shape[0]}"
        )
    if b.shape != (w.shape[1],):
        raise ValidationError(
            f"dense bias shape {b.shape} does not match output width {w.shape[1]}"
        )
    return x @ w + b, (x, w)


def dense_backward(grad_out, cache):
    x, w = cache
    dx = grad_out @ w.T
    dw = x.T @ grad_out
    db = grad_out.sum(axis=0)
    return dx, dw, db


def softmax(logits):
    """Row-wise softmax, stabilized by subtracting the row max."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, targets):
    """Mean negative log-likelihood over the batch plus its logit gradient.

    Returns ``(loss, grad)`` with grad = (softmax - one_hot) / N.
    """
    check_ndim(logits, 2, "logits")
    n, k = logits.shape
    targets = np.asarray(targets)
    if targets.shape != (n,):
        raise ValidationError(f"targets must have shape ({n},), got {targets.shape}")
    if not np.issubdtype(targets.dtype, np.integer):
        raise ValidationError(f"targets must be integers, got dtype {targets.dtype}")
    if targets.size and (targets.min() < 0 or targets.max() >= k):
        raise ValidationError(
            f"target out of range [0, {k}): min {targets.min()}, max {targets.max()}"
        )
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    loss = float(-logp[np.arange(n), targets].mean())
    grad = np.exp(logp)
    grad[np.arange(n), targets] -= 1.0
    grad /= n
    return loss, grad.astype(logits.dtype, copy=False)


def sgd_momentum_step(params, lr: float, momentum: float):
    """v <- momentum*v - lr*g; w <- w + v; gradients zeroed afterwards.

    Frozen parameters are left untouched (gradient still cleared).
    """
    if lr < 0:
        raise ValidationError(f"learning rate must be >= 0, got {lr}")
    if not 0 <= momentum < 1:
        raise ValidationError(f"momentum must lie in [0, 1), got {momentum}")
    for p in params:
        if p.frozen:
            p.zero_grad()
            continue
        if not np.isfinite(p.grad).all():
            raise NonFiniteGradientError(
                f"non-finite gradient in parameter {p.name!r}"
            )
        p.velocity *= momentum
        p.velocity -= lr * p.grad
        p.value += p.velocity
        p.zero_grad()


def he_init_for(name: str, shape, base_seed: int, index: int, dtype, scale: float = 1.0):
    """Seed one parameter's init deterministically from the model seed."""
    return he_init(shape, derive_seed(base_seed, index), dtype=dtype, scale=scale)
