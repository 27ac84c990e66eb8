"""Turning manifests and images into normalized training tensors."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .checkpoint import NormStats
from .errors import ValidationError
from .imageops import resize_bilinear
from .manifest import CorpusManifest
from .ppm import ImageRecord, read_ppm
from .validation import resolve_dtype

STD_FLOOR = 1e-6


def _stacked(images) -> np.ndarray:
    if not images:
        raise ValidationError("no images supplied")
    w, h = images[0].width, images[0].height
    for img in images:
        if (img.width, img.height) != (w, h):
            raise ValidationError(
                f"mismatched image sizes: {img.width}x{img.height} vs {w}x{h}"
            )
    return np.stack([img.pixels for img in images]).astype(np.float64) / 255.0


def compute_channel_stats(images) -> NormStats:
    """Per-channel mean/std of pixel/255 over a set of same-sized images.

    Population std, floored at 1e-6 so constant channels stay usable.
    """
    arr = _stacked(images)
    mean = arr.mean(axis=(0, 1, 2))
    std = np.maximum(arr.std(axis=(0, 1, 2)), STD_FLOOR)
    return NormStats(mean=tuple(mean), std=tuple(std))


def normalize_batch(images, stats: NormStats, precision="float32") -> np.ndarray:
    """(pixel/255 - mean)/std per channel, shaped (N, 3, H, W)."""
    arr = _stacked(images)
    mean = np.asarray(stats.mean)
    std = np.maximum(np.asarray(stats.std), STD_FLOOR)
    arr = (arr - mean) / std
    arr = arr.transpose(0, 3, 1, 2)
    return np.ascontiguousarray(arr, dtype=resolve_dtype(precision))


def load_images(manifest: CorpusManifest, corpus_root, size_hw=None) -> list[ImageRecord]:
    """Read every manifest image, optionally resizing to (height, width)."""
    root = Path(corpus_root)
    images = []
    for sample in manifest:
        img = read_ppm(root / sample.path)
        if size_hw is not None and (img.height, img.width) != tuple(size_hw):
            img = resize_bilinear(img, out_w=size_hw[1], out_h=size_hw[0])
        images.append(img)
    return images


def labels_to_indices(manifest: CorpusManifest, class_names) -> np.ndarray:
    index = {c: i for i, c in enumerate(class_names)}
    missing = sorted({s.leaf_class for s in manifest} - set(index))
    if missing:
        raise ValidationError(
            f"manifest classes not covered by the model: {', '.join(missing)}"
        )
    return np.array([index[s.leaf_class] for s in manifest], dtype=np.int64)
