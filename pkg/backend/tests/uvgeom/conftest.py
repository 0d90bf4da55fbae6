"""
Geometry Test Configuration

Shared morphable model, cameras and maps for the geometry tests.
"""

import numpy as np
import pytest

from app.modules.synthdata import ReflectanceQuad, gen_reflectance, shade_uv
from app.modules.synthdata.dataset import canonical_light
from app.modules.uvgeom import Camera, MorphableModel, synthetic_model

IMAGE_SIZE = 96


@pytest.fixture(scope="session")
def morphable() -> MorphableModel:
    """The stock synthetic model."""
    return synthetic_model(seed=0)


@pytest.fixture
def frontal_camera() -> Camera:
    """Frontal camera centred in a 96x96 image."""
    return Camera.from_yaw(0.0, scale=0.4 * IMAGE_SIZE, translation=(IMAGE_SIZE / 2, IMAGE_SIZE / 2))


@pytest.fixture
def quad16() -> ReflectanceQuad:
    """Generated 16x16 quad shaded under the canonical light."""
    A_d, A_s, N = gen_reflectance(8, 16)
    return ReflectanceQuad(T=shade_uv(A_d, A_s, N, canonical_light()), A_d=A_d, A_s=A_s, N=N)


@pytest.fixture
def flat_view() -> Camera:
    """Camera mapping the flat quad exactly onto a 16x16 image."""
    return Camera(scale=8.0, rotation=np.eye(3), translation=(8.0, 8.0))
