import numpy as np
import pytest

from conftest import random_image
from taxonet.errors import ValidationError
from taxonet.imageops import crop, mask_region, rects_intersection, resize_bilinear
from taxonet.ppm import ImageRecord


def solid(w, h, color):
    return ImageRecord(w, h, np.full((h, w, 3), color, dtype=np.uint8))


class TestResize:
    def test_same_size_identity(self, rng):
        img = random_image(rng, 6, 4)
        out = resize_bilinear(img, 6, 4)
        assert out == img

    def test_constant_stays_constant(self):
        img = solid(5, 3, 77)
        for w, h in ((1, 1), (10, 7), (3, 9)):
            out = resize_bilinear(img, w, h)
            assert np.all(out.pixels == 77)

    def test_checkerboard_downsample(self):
        # 2x2 checkerboard of 0/255 to 1x1: all four pixels weighted 1/4
        # -> 127.5, rounds half up to 128
        px = np.zeros((2, 2, 3), dtype=np.uint8)
        px[0, 1] = 255
        px[1, 0] = 255
        out = resize_bilinear(ImageRecord(2, 2, px), 1, 1)
        assert np.all(out.pixels == 128)

    def test_upsample_shape(self, rng):
        out = resize_bilinear(random_image(rng, 3, 3), 8, 5)
        assert (out.width, out.height) == (8, 5)

    def test_deterministic(self, rng):
        img = random_image(rng, 9, 9)
        a = resize_bilinear(img, 4, 4)
        b = resize_bilinear(img, 4, 4)
        assert a == b

    def test_invalid_dims(self, rng):
        with pytest.raises(ValidationError):
            resize_bilinear(random_image(rng), 0, 4)


class TestMaskRegion:
    def test_full_image(self, rng):
        img = random_image(rng, 4, 4)
        out = mask_region(img, (0, 0, 4, 4), (9, 8, 7))
        assert np.all(out.pixels == [9, 8, 7])

    def test_zero_area_unchanged(self, rng):
        img = random_image(rng, 4, 4)
        out = mask_region(img, (1, 1, 0, 0), (0, 0, 0))
        assert out == img

    def test_exact_pixel_count(self, rng):
        img = random_image(rng, 4, 4)
        out = mask_region(img, (1, 1, 2, 2), (128, 128, 128))
        changed = (out.pixels != img.pixels).any(axis=2)
        # at most 4 pixels differ, and all 4 inside hold the fill color
        assert changed.sum() <= 4
        assert np.all(out.pixels[1:3, 1:3] == 128)
        outside = np.ones((4, 4), dtype=bool)
        outside[1:3, 1:3] = False
        assert np.array_equal(out.pixels[outside], img.pixels[outside])

    def test_out_of_bounds(self, rng):
        with pytest.raises(ValidationError, match="bounds"):
            mask_region(random_image(rng, 4, 4), (2, 2, 3, 3), (0, 0, 0))


class TestCrop:
    def test_crop_values(self, rng):
        img = random_image(rng, 6, 6)
        out = crop(img, (2, 1, 3, 4))
        assert np.array_equal(out.pixels, img.pixels[1:5, 2:5])

    def test_full_crop_equals_image(self, rng):
        img = random_image(rng, 5, 5)
        assert crop(img, (0, 0, 5, 5)) == img

    def test_empty_crop_rejected(self, rng):
        with pytest.raises(ValidationError):
            crop(random_image(rng, 5, 5), (0, 0, 0, 3))


class TestRects:
    def test_intersection(self):
        assert rects_intersection((0, 0, 2, 2), (1, 1, 2, 2)) == (1, 1, 1, 1)

    def test_disjoint(self):
        assert rects_intersection((0, 0, 2, 2), (2, 0, 2, 2)) is None
