import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_image
from taxonet.errors import PpmFormatError, PpmTruncatedError
from taxonet.ppm import ImageRecord, decode_ppm, encode_ppm, read_ppm, write_ppm


def test_decode_exact_pixels():
    data = b"P6\n2 1\n255\n" + bytes([255, 0, 0, 0, 0, 255])
    img = decode_ppm(data)
    assert (img.width, img.height) == (2, 1)
    assert img.pixels[0, 0].tolist() == [255, 0, 0]
    assert img.pixels[0, 1].tolist() == [0, 0, 255]


def test_p5_grayscale_replicated():
    data = b"P5\n1 1\n255\n" + bytes([100])
    img = decode_ppm(data)
    assert img.pixels[0, 0].tolist() == [100, 100, 100]


def test_ascii_p3_rejected():
    with pytest.raises(PpmFormatError, match="P3"):
        decode_ppm(b"P3\n1 1\n255\n255 0 0\n")


def test_wrong_maxval_rejected():
    with pytest.raises(PpmFormatError, match="maxval"):
        decode_ppm(b"P6\n1 1\n65535\n" + bytes(6))


def test_truncated_raster():
    with pytest.raises(PpmTruncatedError, match="truncated"):
        decode_ppm(b"P6\n2 2\n255\n" + bytes(5))


def test_trailing_bytes_rejected():
    with pytest.raises(PpmTruncatedError, match="trailing"):
        decode_ppm(b"P6\n1 1\n255\n" + bytes(4))


def test_header_comments_skipped():
    data = b"P6\n# a comment\n2 1 # another\n255\n" + bytes(6)
    img = decode_ppm(data)
    assert (img.width, img.height) == (2, 1)


def test_round_trip_random_images(rng):
    for _ in range(20):
        w = int(rng.integers(1, 12))
        h = int(rng.integers(1, 12))
        img = random_image(rng, w, h)
        blob = encode_ppm(img)
        back = decode_ppm(blob)
        assert back == img
        assert encode_ppm(back) == blob


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 16), st.integers(1, 16), st.integers(0, 2**32 - 1))
def test_round_trip_property(w, h, seed):
    img = random_image(np.random.default_rng(seed), w, h)
    assert decode_ppm(encode_ppm(img)) == img


def test_file_round_trip(tmp_path, rng):
    img = random_image(rng, 5, 7)
    path = tmp_path / "x.ppm"
    write_ppm(path, img)
    assert read_ppm(path) == img


def test_image_record_invariant():
    with pytest.raises(Exception, match="shape"):
        ImageRecord(width=2, height=2, pixels=np.zeros((2, 3, 3), dtype=np.uint8))
