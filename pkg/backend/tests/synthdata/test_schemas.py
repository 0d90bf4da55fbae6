"""
Reflectance Quad Tests
"""

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.exceptions import ShapeError
from app.modules.synthdata import ChannelLayout, DatasetHeader, ReflectanceQuad, gen_reflectance, shade_uv
from app.modules.synthdata.dataset import canonical_light


@pytest.fixture
def quad() -> ReflectanceQuad:
    """Generated quad at 16x16 with a monochrome specular map."""
    A_d, A_s, N = gen_reflectance(11, 16)
    return ReflectanceQuad(T=shade_uv(A_d, A_s, N, canonical_light()), A_d=A_d, A_s=A_s, N=N)


def test_layout_split_and_slices():
    """Test the channel order and slices of both layouts."""
    assert ChannelLayout().split == [3, 3, 1, 3]
    wide = ChannelLayout(specular=3)
    assert wide.total == 12
    assert wide.slices()["N"] == slice(9, 12)
    with pytest.raises(ValidationError):
        ChannelLayout(specular=2)


def test_stack_is_in_working_range(quad: ReflectanceQuad):
    """Test that the stacked maps lie in [-1, 1] with ten channels."""
    stack = quad.to_stack()
    assert stack.shape == (10, 16, 16)
    assert stack.min() >= -1.0 and stack.max() <= 1.0


def test_stack_decodes_to_same_maps(quad: ReflectanceQuad):
    """Test that decoding a stack recovers every map."""
    decoded = ReflectanceQuad.from_stack(quad.to_stack())
    for name, array in quad.maps().items():
        np.testing.assert_allclose(decoded.maps()[name], array, atol=1e-12)


def test_decoding_clips_and_renormalises():
    """Test that out-of-range stacks are clipped and normals projected to the upper hemisphere."""
    stack = np.full((10, 4, 4), 1.7)
    stack[7:] = np.array([0.3, 0.0, -0.8])[:, None, None]
    decoded = ReflectanceQuad.from_stack(stack)
    assert decoded.T.max() == 1.0
    np.testing.assert_allclose(np.linalg.norm(decoded.N, axis=0), 1.0)
    assert decoded.N[2].min() > 0.0


def test_encoded_normals(quad: ReflectanceQuad):
    """Test the 0.5 * (n + 1) normal encoding."""
    np.testing.assert_allclose(quad.encoded_maps()["N"], 0.5 * (quad.N + 1.0))


def test_wrong_stack_width_rejected():
    """Test that a stack with the wrong channel count raises ShapeError."""
    with pytest.raises(ShapeError):
        ReflectanceQuad.from_stack(np.zeros((12, 4, 4)))


def test_mismatched_resolutions_rejected(quad: ReflectanceQuad):
    """Test that maps must share a resolution."""
    with pytest.raises(ShapeError):
        ReflectanceQuad(T=quad.T, A_d=quad.A_d, A_s=np.zeros((1, 8, 8)), N=quad.N)


def test_dataset_header_layout():
    """Test that the header reconstructs its channel layout."""
    header = DatasetHeader(count=2, resolution=8, channel_split=[3, 3, 3, 3], seed=0)
    assert header.layout == ChannelLayout(specular=3)
    with pytest.raises(ValidationError):
        DatasetHeader(count=2, resolution=8, channel_split=[3, 3, 3], seed=0)
