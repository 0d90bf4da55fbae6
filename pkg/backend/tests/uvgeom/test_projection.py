"""
Rendering and Unwrapping Tests

This module tests shading of meshes into images and the inverse sampling of
images into partially observed UV textures.
"""

import numpy as np
import pytest

from app.core.exceptions import ResolutionError, ShapeError, ViewportError
from app.modules.synthdata import LightSpec, ReflectanceQuad, shade_uv
from app.modules.synthdata.dataset import canonical_light
from app.modules.uvgeom import (
    Camera,
    MorphableModel,
    erode_mask,
    flat_quad_mesh,
    instantiate,
    render,
    unwrap,
    unwrap_texture,
)
from app.modules.uvgeom.projection import tangent_frames
from tests.uvgeom.conftest import IMAGE_SIZE


def test_flat_quad_render_matches_uv_shading(quad16: ReflectanceQuad, flat_view: Camera):
    """Test that a frontal flat quad renders to the UV-space shading of its maps."""
    light = canonical_light()
    image = render(flat_quad_mesh(), flat_view, quad16, light, 16, 16)
    expected = shade_uv(quad16.A_d, quad16.A_s, quad16.N, light)
    np.testing.assert_allclose(image.transpose(2, 0, 1), expected, atol=2e-2)


def test_background_is_clear_color(quad16: ReflectanceQuad):
    """Test that pixels outside the mesh keep the clear colour."""
    camera = Camera(scale=4.0, translation=(8.0, 8.0))
    image = render(flat_quad_mesh(), camera, quad16, canonical_light(), 16, 16, clear_color=(0.2, 0.4, 0.6))
    np.testing.assert_allclose(image[0, 0], [0.2, 0.4, 0.6])
    np.testing.assert_allclose(image[15, 15], [0.2, 0.4, 0.6])
    assert not np.allclose(image[8, 8], [0.2, 0.4, 0.6])


def test_back_view_sees_nothing(quad16: ReflectanceQuad):
    """Test that a one-sided quad viewed from behind is culled entirely."""
    camera = Camera.from_yaw(180.0, scale=8.0, translation=(8.0, 8.0))
    image = render(flat_quad_mesh(), camera, quad16, canonical_light(), 16, 16)
    assert np.all(image == 0.0)
    texture, raw = unwrap_texture(image, flat_quad_mesh(), camera, 16)
    assert raw.mean() < 0.05


def test_render_rejects_empty_viewport(quad16: ReflectanceQuad, flat_view: Camera):
    """Test that a zero-sized viewport raises ViewportError."""
    with pytest.raises(ViewportError):
        render(flat_quad_mesh(), flat_view, quad16, canonical_light(), 0, 16)


def test_tangent_frames_are_orthonormal(morphable: MorphableModel):
    """Test per-face frames are orthonormal and follow the face normal."""
    mesh = instantiate(morphable)
    t, b, n = tangent_frames(mesh)
    np.testing.assert_allclose(np.linalg.norm(t, axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(np.einsum("ij,ij->i", t, b), 0.0, atol=1e-9)
    np.testing.assert_allclose(np.einsum("ij,ij->i", t, n), 0.0, atol=1e-9)
    np.testing.assert_allclose(n, mesh.face_normals())


def test_flat_quad_unwrap_round_trip(quad16: ReflectanceQuad, flat_view: Camera):
    """Test that unwrapping a frontal render recovers the texture on observed texels."""
    image = render(flat_quad_mesh(), flat_view, quad16, canonical_light(), 16, 16)
    texture, raw = unwrap_texture(image, flat_quad_mesh(), flat_view, 16)
    assert raw.all()
    assert np.abs(texture - quad16.T).mean() < 2e-2


def test_eroded_mask_is_subset_of_raw(quad16: ReflectanceQuad, flat_view: Camera):
    """Test that erosion only removes texels, including the grid border."""
    image = render(flat_quad_mesh(), flat_view, quad16, canonical_light(), 16, 16)
    _, raw = unwrap_texture(image, flat_quad_mesh(), flat_view, 16)
    eroded = erode_mask(raw)
    assert not np.any(eroded & ~raw)
    assert eroded.sum() == 14 * 14


def test_unwrap_observation(quad16: ReflectanceQuad, flat_view: Camera):
    """Test that unwrap yields an Observation in the working range with zeros off the mask."""
    image = render(flat_quad_mesh(), flat_view, quad16, canonical_light(), 16, 16)
    obs = unwrap(image, flat_quad_mesh(), flat_view, 16)
    assert obs.channels == 10
    grid = obs.mask.grid
    np.testing.assert_allclose(obs.x0_known[:3][:, grid], 2.0 * quad16.T[:, grid] - 1.0, atol=4e-2)
    assert np.all(obs.x0_known[:, ~grid] == 0.0)


def test_frontal_ellipsoid_sees_part_of_the_atlas(morphable: MorphableModel, frontal_camera: Camera, quad16: ReflectanceQuad):
    """Test that a frontal view of the mean shape observes a proper subset of the UV atlas."""
    mesh = instantiate(morphable)
    image = render(mesh, frontal_camera, quad16, canonical_light(), IMAGE_SIZE, IMAGE_SIZE)
    obs = unwrap(image, mesh, frontal_camera, 32)
    assert 0.2 < obs.mask.fraction < 0.8
    # the front of the head sits in the middle of the u range
    assert obs.mask.grid[16, 16]
    assert not obs.mask.grid[16, 1]


def test_side_views_observe_different_texels(morphable: MorphableModel, quad16: ReflectanceQuad):
    """Test that turning the camera moves the observed region across the atlas."""
    mesh = instantiate(morphable)
    masks = []
    for yaw in (-35.0, 35.0):
        camera = Camera.from_yaw(yaw, scale=0.4 * IMAGE_SIZE, translation=(IMAGE_SIZE / 2, IMAGE_SIZE / 2))
        image = render(mesh, camera, quad16, canonical_light(), IMAGE_SIZE, IMAGE_SIZE)
        masks.append(unwrap(image, mesh, camera, 32).mask.grid)
    assert not np.array_equal(masks[0], masks[1])


def test_mesh_outside_image_gives_empty_mask(quad16: ReflectanceQuad):
    """Test that a mesh projecting off-screen yields an all-zero mask."""
    camera = Camera(scale=8.0, translation=(500.0, 500.0))
    image = np.zeros((16, 16, 3))
    obs = unwrap(image, flat_quad_mesh(), camera, 16)
    assert obs.mask.fraction == 0.0


def test_unwrap_validation(flat_view: Camera):
    """Test image shape and resolution checks."""
    with pytest.raises(ShapeError):
        unwrap_texture(np.zeros((16, 16)), flat_quad_mesh(), flat_view, 16)
    with pytest.raises(ResolutionError):
        unwrap_texture(np.zeros((16, 16, 3)), flat_quad_mesh(), flat_view, 0)


def test_lighting_direction_changes_render(quad16: ReflectanceQuad, flat_view: Camera):
    """Test that relighting the same quad changes the image."""
    a = render(flat_quad_mesh(), flat_view, quad16, canonical_light(), 16, 16)
    b = render(flat_quad_mesh(), flat_view, quad16, LightSpec.towards((-0.6, 0.2, 0.5), diffuse_intensity=1.0), 16, 16)
    assert not np.allclose(a, b)
