import numpy as np
import pytest
from skimage import color, data

from rift.pipeline import RiftConfig, extract_features


def _gray(rgb):
    return color.rgb2gray(rgb).astype(np.float64)


NATURAL = {
    "camera": lambda: data.camera() / 255.0,
    "astronaut": lambda: _gray(data.astronaut()),
    "coffee": lambda: _gray(data.coffee()),
}


@pytest.fixture(scope="session")
def camera():
    return data.camera() / 255.0


@pytest.fixture(scope="session")
def natural_images():
    return {name: make() for name, make in NATURAL.items()}


@pytest.fixture(scope="session")
def small_natural():
    """256x256 crop of the camera image, for cheaper end-to-end checks."""
    return data.camera()[100:356, 150:406] / 255.0


@pytest.fixture(scope="session")
def camera_reference_features(camera):
    return extract_features(camera, RiftConfig(), all_variants=False)


@pytest.fixture(scope="session")
def camera_target_features(camera):
    return extract_features(camera, RiftConfig(), all_variants=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
