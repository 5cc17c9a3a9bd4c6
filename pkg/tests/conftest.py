import numpy as np
import pytest

from plumeseg.radiometry import EmissivityConverter
from plumeseg.synth import SceneSpec, generate


@pytest.fixture(scope="session")
def default_scene():
    spec = SceneSpec()
    cube, gt = generate(spec)
    return spec, cube, gt


@pytest.fixture(scope="session")
def default_emissivity(default_scene):
    _, cube, _ = default_scene
    return EmissivityConverter(300.0).fit_transform(cube)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
