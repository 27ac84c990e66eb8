"""Binary PPM (P6) codec, the corpus interchange format.

Only maxval 255 is supported. Grayscale P5 is accepted on read with the
gray value replicated across RGB. The encoder writes a canonical header so
encode -> decode -> encode round-trips bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PpmFormatError, PpmTruncatedError, ValidationError


@dataclass
class ImageRecord:
    """8-bit RGB image, pixels shaped (height, width, 3) row-major."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if self.width < 1 or self.height < 1:
            raise ValidationError(f"image dims must be positive, got "
                                  f"{self.width}x{self.height}")
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValidationError(
                f"pixel array shape {self.pixels.shape} does not match "
                f"{self.height}x{self.width}x3"
            )

    @classmethod
    def from_array(cls, pixels: np.ndarray) -> "ImageRecord":
        pixels = np.asarray(pixels)
        return cls(width=pixels.shape[1], height=pixels.shape[0], pixels=pixels)

    def copy(self) -> "ImageRecord":
        return ImageRecord(self.width, self.height, self.pixels.copy())

    def __eq__(self, other):
        return (isinstance(other, ImageRecord)
                and self.width == other.width
                and self.height == other.height
                and np.array_equal(self.pixels, other.pixels))


def _read_header_tokens(data: bytes, count: int, start: int):
    """Read whitespace-separated header tokens, skipping # comments."""
    tokens = []
    i = start
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        if j == i:
            raise PpmTruncatedError("file ends inside the header")
        tokens.append(data[i:j])
        i = j
    if i >= n or not data[i : i + 1].isspace():
        raise PpmTruncatedError("header not terminated by whitespace")
    return tokens, i + 1  # skip the single whitespace byte before the raster


def decode_ppm(data: bytes) -> ImageRecord:
    if len(data) < 2:
        raise PpmTruncatedError("file too short for a PNM magic")
    magic = data[:2]
    if magic not in (b"P6", b"P5"):
        raise PpmFormatError(f"unsupported PNM magic {magic!r} (binary P6/P5 only)")
    tokens, raster_start = _read_header_tokens(data, 3, 2)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise PpmFormatError(f"non-numeric header fields {tokens!r}")
    if width < 1 or height < 1:
        raise PpmFormatError(f"invalid dimensions {width}x{height}")
    if maxval != 255:
        raise PpmFormatError(f"unsupported maxval {maxval} (must be 255)")
    channels = 3 if magic == b"P6" else 1
    expected = width * height * channels
    raster = data[raster_start:]
    if len(raster) < expected:
        raise PpmTruncatedError(
            f"raster truncated: {len(raster)} of {expected} bytes"
        )
    if len(raster) > expected:
        raise PpmTruncatedError(
            f"{len(raster) - expected} trailing bytes after the raster"
        )
    arr = np.frombuffer(raster, dtype=np.uint8, count=expected)
    if channels == 1:
        arr = np.repeat(arr, 3)
    pixels = arr.reshape(height, width, 3).copy()
    return ImageRecord(width=width, height=height, pixels=pixels)


def encode_ppm(image: ImageRecord) -> bytes:
    header = f"P6\n{image.width} {image.height}\n255\n".encode()
    return header + image.pixels.tobytes()


def read_ppm(path) -> ImageRecord:
    return decode_ppm(Path(path).read_bytes())


def write_ppm(path, image: ImageRecord) -> None:
    Path(path).write_bytes(encode_ppm(image))
