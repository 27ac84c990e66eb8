"""Input validation helpers used across layers, estimator, and pipeline."""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteError, ValidationError

FLOAT_DTYPES = {"float32": np.float32, "float64": np.float64}


def resolve_dtype(precision) -> np.dtype:
    """Map ``"float32"``/``"float64"`` (or a numpy dtype) to a numpy dtype."""
    if isinstance(precision, str):
        try:
            return np.dtype(FLOAT_DTYPES[precision])
        except KeyError:
            raise ValidationError(
                f"precision must be one of {sorted(FLOAT_DTYPES)}, got {precision!r}"
            )
    dt = np.dtype(precision)
    if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValidationError(f"unsupported dtype {dt}")
    return dt


def require_finite(arr: np.ndarray, what: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{what} contains non-finite values")
    return arr


def check_ndim(arr: np.ndarray, ndim: int, what: str) -> np.ndarray:
    if arr.ndim != ndim:
        raise ValidationError(f"{what} must be {ndim}-D, got shape {arr.shape}")
    return arr


def check_image_batch(X, input_size=None, dtype=None) -> np.ndarray:
    """Validate a batch of images as a finite float array of shape (N, C, H, W)."""
    X = np.asarray(X, dtype=dtype if dtype is not None else None)
    if not np.issubdtype(X.dtype, np.floating):
        X = X.astype(np.float32)
    check_ndim(X, 4, "image batch")
    if X.shape[0] == 0:
        raise ValidationError("image batch is empty")
    if input_size is not None and tuple(X.shape[1:]) != tuple(input_size):
        raise ValidationError(
            f"image batch shape {tuple(X.shape[1:])} does not match the "
            f"model input size {tuple(input_size)}"
        )
    require_finite(X, "image batch")
    return X


def check_class_indices(y, num_classes: int) -> np.ndarray:
    """Validate integer class targets in ``[0, num_classes)``."""
    y = np.asarray(y)
    check_ndim(y, 1, "targets")
    if not np.issubdtype(y.dtype, np.integer):
        if np.issubdtype(y.dtype, np.floating) and np.all(y == y.astype(np.int64)):
            y = y.astype(np.int64)
        else:
            raise ValidationError(f"targets must be integer class indices, got dtype {y.dtype}")
    y = y.astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= num_classes):
        raise ValidationError(
            f"target out of range: values must lie in [0, {num_classes}), "
            f"got min {y.min()}, max {y.max()}"
        )
    return y
