"""
Reflectance Generator Tests
"""

import numpy as np
import pytest

from app.modules.synthdata import gen_reflectance
from app.modules.synthdata.generator import SPECULAR_MAX, normals_from_height


@pytest.mark.parametrize("specular_channels", [1, 3])
def test_maps_are_in_range(specular_channels: int):
    """Test value ranges and shapes of the generated maps."""
    A_d, A_s, N = gen_reflectance(17, 32, specular_channels)
    assert A_d.shape == (3, 32, 32)
    assert A_s.shape == (specular_channels, 32, 32)
    assert N.shape == (3, 32, 32)
    assert A_d.min() >= 0.0 and A_d.max() <= 1.0
    assert A_s.min() >= 0.0 and A_s.max() <= SPECULAR_MAX + 1e-12
    np.testing.assert_allclose(np.linalg.norm(N, axis=0), 1.0, atol=1e-12)
    assert N[2].min() > 0.0


def test_same_seed_same_maps():
    """Test that the generator is a pure function of its seed."""
    first = gen_reflectance(5, 16)
    second = gen_reflectance(5, 16)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a, b)


def test_different_seeds_differ():
    """Test that distinct seeds give distinct materials."""
    assert not np.allclose(gen_reflectance(5, 16)[0], gen_reflectance(6, 16)[0])


def test_albedo_has_spatial_variation():
    """Test that the diffuse albedo is not a flat colour."""
    A_d, _, _ = gen_reflectance(9, 32)
    assert A_d.std(axis=(1, 2)).min() > 1e-3


def test_flat_height_gives_up_normals():
    """Test that a constant height field yields +z normals."""
    N = normals_from_height(np.zeros((8, 8)))
    np.testing.assert_allclose(N[2], 1.0)
    np.testing.assert_allclose(N[:2], 0.0)
