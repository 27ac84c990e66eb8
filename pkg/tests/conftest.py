import numpy as np
import pytest

from taxonet.ppm import ImageRecord


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_image(rng, width=8, height=8) -> ImageRecord:
    pixels = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    return ImageRecord(width=width, height=height, pixels=pixels)
