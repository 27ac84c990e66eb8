"""Pixel-level operations on ImageRecords: resize, crop, mask."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .ppm import ImageRecord


def _check_rect(image: ImageRecord, rect, allow_empty: bool = True):
    x, y, w, h = (int(v) for v in rect)
    if w < 0 or h < 0 or (not allow_empty and (w == 0 or h == 0)):
        raise ValidationError(f"rect {rect} has negative or empty extent")
    if x < 0 or y < 0 or x + w > image.width or y + h > image.height:
        raise ValidationError(
            f"rect {rect} exceeds image bounds {image.width}x{image.height}"
        )
    return x, y, w, h


def mask_region(image: ImageRecord, rect, fill_color) -> ImageRecord:
    """Paint every pixel inside ``rect`` (x, y, w, h) with ``fill_color``."""
    x, y, w, h = _check_rect(image, rect)
    fill = np.asarray(fill_color, dtype=np.uint8)
    if fill.shape != (3,):
        raise ValidationError(f"fill color must be an RGB triple, got {fill_color!r}")
    out = image.pixels.copy()
    out[y : y + h, x : x + w] = fill
    return ImageRecord(image.width, image.height, out)


def crop(image: ImageRecord, rect) -> ImageRecord:
    x, y, w, h = _check_rect(image, rect, allow_empty=False)
    return ImageRecord(w, h, image.pixels[y : y + h, x : x + w].copy())


def resize_bilinear(image: ImageRecord, out_w: int, out_h: int) -> ImageRecord:
    """Bilinear resize with half-pixel-centered sampling.

    Resizing to the source size is the identity; results are deterministic
    (float64 accumulation, round half up).
    """
    if out_w < 1 or out_h < 1:
        raise ValidationError(f"output dims must be positive, got {out_w}x{out_h}")
    if out_w == image.width and out_h == image.height:
        return image.copy()
    src = image.pixels.astype(np.float64)
    in_h, in_w = image.height, image.width

    def axis_coords(n_out, n_in):
        coords = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        coords = np.clip(coords, 0.0, n_in - 1.0)
        lo = np.floor(coords).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = coords - lo
        return lo, hi, frac

    y0, y1, fy = axis_coords(out_h, in_h)
    x0, x1, fx = axis_coords(out_w, in_w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    out = np.floor(out + 0.5).clip(0, 255).astype(np.uint8)
    return ImageRecord(out_w, out_h, out)


def rects_intersection(a, b):
    """Intersection of two (x, y, w, h) rects, or None when disjoint."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    x0 = max(ax, bx)
    y0 = max(ay, by)
    x1 = min(ax + aw, bx + bw)
    y1 = min(ay + ah, by + bh)
    if x1 <= x0 or y1 <= y0:
        return None
    return (x0, y0, x1 - x0, y1 - y0)
