"""
Dataset Tests

This module tests writing, reading and reproducibility of the synthetic
training set.
"""

from pathlib import Path

import numpy as np
import pytest

from app.core.exceptions import DatasetError
from app.modules.synthdata import ChannelLayout, ReflectanceQuad, canonical_light, load_dataset, make_dataset, shade_uv
from app.modules.synthdata.dataset import STORAGE_DTYPE


@pytest.fixture
def dataset_path(tmp_path: Path) -> Path:
    """Six relit items at 8x8."""
    return make_dataset(6, 8, seed=42, path=tmp_path / "train.ndt", histogram_match_prob=0.5)


def test_round_trip(dataset_path: Path):
    """Test that the header and stacks come back as written."""
    data = load_dataset(dataset_path)
    assert len(data) == 6
    assert data.header.resolution == 8
    assert data.header.channel_split == [3, 3, 1, 3]
    assert data.stacks.shape == (6, 10, 8, 8)
    assert data.stacks.dtype == STORAGE_DTYPE
    assert len(data.lights) == 6


def test_items_satisfy_quad_invariants(dataset_path: Path):
    """Test that stored items decode to valid quads whose T matches their light."""
    data = load_dataset(dataset_path)
    for i in range(len(data)):
        quad = data.quad(i)
        assert isinstance(quad, ReflectanceQuad)
        np.testing.assert_allclose(np.linalg.norm(quad.N, axis=0), 1.0, atol=1e-6)
        assert quad.N[2].min() > 0.0
        T = shade_uv(quad.A_d, quad.A_s, quad.N, data.lights[i])
        np.testing.assert_allclose(T, quad.T, atol=1e-4)


def test_same_seed_same_file(tmp_path: Path):
    """Test that the bundle bytes depend only on the arguments, not on the worker count."""
    a = make_dataset(5, 8, seed=3, path=tmp_path / "a.ndt", workers=1)
    b = make_dataset(5, 8, seed=3, path=tmp_path / "b.ndt", workers=3)
    assert a.read_bytes() == b.read_bytes()


def test_seed_changes_data(tmp_path: Path):
    """Test that different seeds give different items."""
    a = load_dataset(make_dataset(2, 8, seed=3, path=tmp_path / "a.ndt"))
    b = load_dataset(make_dataset(2, 8, seed=4, path=tmp_path / "b.ndt"))
    assert not np.allclose(a.stacks, b.stacks)


def test_no_relight_uses_canonical_light(tmp_path: Path):
    """Test that disabling relighting shades every item under the canonical light."""
    data = load_dataset(make_dataset(3, 8, seed=1, path=tmp_path / "c.ndt", relight=False))
    assert data.header.relight is False
    for light in data.lights:
        np.testing.assert_allclose(light.as_array(), canonical_light().as_array(), atol=1e-12)


def test_three_channel_specular_layout(tmp_path: Path):
    """Test that a tinted specular layout widens the stack to 12 channels."""
    data = load_dataset(make_dataset(2, 8, seed=1, path=tmp_path / "w.ndt", layout=ChannelLayout(specular=3)))
    assert data.stacks.shape[1] == 12
    assert data.quad(0).A_s.shape == (3, 8, 8)


def test_limit(dataset_path: Path):
    """Test that limit reads only the first items."""
    data = load_dataset(dataset_path, limit=2)
    assert len(data) == 2
    np.testing.assert_array_equal(data.stacks, load_dataset(dataset_path).stacks[:2])


def test_zero_count_rejected(tmp_path: Path):
    """Test that an empty dataset cannot be created."""
    with pytest.raises(DatasetError):
        make_dataset(0, 8, seed=1, path=tmp_path / "z.ndt")


def test_missing_file_rejected(tmp_path: Path):
    """Test that reading a missing dataset raises DatasetError."""
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "absent.ndt")
