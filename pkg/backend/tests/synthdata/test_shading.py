"""
Shading Tests

This module tests Blinn-Phong shading of UV maps and albedo histogram matching.
"""

import numpy as np
import pytest

from app.core.exceptions import ShapeError
from app.modules.synthdata import LightSpec, blinn_phong, gen_reflectance, histogram_match, random_light, shade_uv
from app.modules.ndtensor.random import make_rng


@pytest.fixture
def flat_maps():
    """Uniform albedos and +z normals on a 4x4 grid."""
    A_d = np.full((3, 4, 4), 0.5)
    A_s = np.full((1, 4, 4), 0.4)
    N = np.zeros((3, 4, 4))
    N[2] = 1.0
    return A_d, A_s, N


def test_overhead_light_returns_albedo(flat_maps):
    """Test that a unit overhead light with no ambient or specular reproduces A_d."""
    A_d, A_s, N = flat_maps
    light = LightSpec(direction=(0.0, 0.0, 1.0), diffuse_intensity=1.0)
    np.testing.assert_allclose(shade_uv(A_d, A_s, N, light), A_d)


def test_grazing_light_leaves_ambient(flat_maps):
    """Test that a light perpendicular to the normal contributes only ambient."""
    A_d, A_s, N = flat_maps
    light = LightSpec(direction=(1.0, 0.0, 0.0), ambient=0.2)
    np.testing.assert_allclose(shade_uv(A_d, A_s, N, light), 0.1)


def test_specular_peak_at_mirror_direction(flat_maps):
    """Test that head-on light and view add the full specular term."""
    A_d, A_s, N = flat_maps
    light = LightSpec(direction=(0.0, 0.0, 1.0), diffuse_intensity=0.5, specular_intensity=1.0)
    np.testing.assert_allclose(shade_uv(A_d, A_s, N, light), 0.5 * 0.5 + 0.4)


def test_output_is_clamped():
    """Test that strong lights stay within [0, 1] on generated maps."""
    A_d, A_s, N = gen_reflectance(3, 16)
    light = LightSpec.towards((0.2, 0.1, 1.0), diffuse_intensity=1.5, ambient=1.5, specular_intensity=1.5)
    T = shade_uv(A_d, A_s, N, light)
    assert T.min() >= 0.0 and T.max() <= 1.0
    assert T.max() == 1.0


def test_random_light_shading_in_range():
    """Test shading under randomised lights stays in [0, 1]."""
    A_d, A_s, N = gen_reflectance(4, 16)
    rng = make_rng(0, "lights")
    for _ in range(5):
        T = shade_uv(A_d, A_s, N, random_light(rng))
        assert T.shape == (3, 16, 16)
        assert 0.0 <= T.min() and T.max() <= 1.0


def test_blinn_phong_on_pixel_lists(flat_maps):
    """Test that shading works on flattened (C, P) arrays."""
    A_d, A_s, N = (m.reshape(m.shape[0], -1) for m in flat_maps)
    out = blinn_phong(A_d, A_s, N, LightSpec(direction=(0.0, 0.0, 1.0)))
    assert out.shape == (3, 16)


def test_view_must_be_unit(flat_maps):
    """Test that a non-unit view direction is rejected."""
    A_d, A_s, N = flat_maps
    with pytest.raises(ValueError):
        blinn_phong(A_d, A_s, N, LightSpec(direction=(0.0, 0.0, 1.0)), view=(0.0, 0.0, 2.0))


def test_resolution_mismatch(flat_maps):
    """Test that maps of different resolutions raise ShapeError."""
    A_d, _, N = flat_maps
    with pytest.raises(ShapeError):
        shade_uv(A_d, np.zeros((1, 8, 8)), N, LightSpec(direction=(0.0, 0.0, 1.0)))


def test_light_direction_validation():
    """Test that lights need a unit direction unless built with towards()."""
    with pytest.raises(ValueError):
        LightSpec(direction=(0.0, 0.0, 2.0))
    assert LightSpec.towards((0.0, 0.0, 2.0)).direction == (0.0, 0.0, 1.0)


def test_light_array_round_trip():
    """Test that lights survive their array encoding."""
    light = random_light(make_rng(1))
    restored = LightSpec.from_array(light.as_array())
    np.testing.assert_allclose(restored.as_array(), light.as_array(), atol=1e-12)


def test_histogram_match_adopts_reference_distribution():
    """Test that matched channels carry the reference's sorted values."""
    rng = np.random.default_rng(2)
    source = rng.uniform(0.0, 1.0, size=(3, 8, 8))
    reference = rng.uniform(0.3, 0.6, size=(3, 8, 8))
    out = histogram_match(source, reference)
    for c in range(3):
        np.testing.assert_allclose(np.sort(out[c].ravel()), np.sort(reference[c].ravel()), atol=1e-9)
        # rank order of the source is preserved
        assert np.array_equal(np.argsort(out[c].ravel()), np.argsort(source[c].ravel()))


def test_histogram_match_constant_reference():
    """Test that a constant reference channel maps to that constant."""
    source = np.random.default_rng(3).uniform(size=(3, 4, 4))
    reference = np.full((3, 4, 4), 0.25)
    np.testing.assert_allclose(histogram_match(source, reference), 0.25)


def test_histogram_match_channel_mismatch():
    """Test that channel counts must agree."""
    with pytest.raises(ShapeError):
        histogram_match(np.zeros((3, 4, 4)), np.zeros((1, 4, 4)))
