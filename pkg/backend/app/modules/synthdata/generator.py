"""
Procedural reflectance maps.

Diffuse albedo is a clamped sum of value-noise octaves plus soft blotches,
specular albedo a single low-frequency field, and normals are lifted from a
smooth random height field.
"""

from typing import Tuple

import numpy as np
from scipy import ndimage

from app.modules.ndtensor.random import make_rng

SPECULAR_MAX = 0.6


def value_noise(rng: np.random.Generator, R: int, cells: int) -> np.ndarray:
    """Uniform noise on a `cells` x `cells` lattice, cubic-upsampled to R x R."""
    lattice = rng.uniform(-1.0, 1.0, size=(cells, cells))
    field = ndimage.zoom(lattice, R / cells, order=3, mode="reflect", grid_mode=True)
    return field[:R, :R]


def octave_noise(rng: np.random.Generator, R: int, octaves: int) -> np.ndarray:
    """Sum of `octaves` value-noise layers, halving amplitude per layer."""
    total = np.zeros((R, R))
    for k in range(octaves):
        cells = min(2 ** (k + 2), R)
        total += 0.5 ** k * value_noise(rng, R, cells)
    return total


def _blotches(rng: np.random.Generator, R: int, count: int) -> np.ndarray:
    yy, xx = np.mgrid[0:R, 0:R].astype(np.float64)
    out = np.zeros((3, R, R))
    for _ in range(count):
        cy, cx = rng.uniform(0, R, size=2)
        radius = rng.uniform(0.05, 0.2) * R
        tint = rng.uniform(-0.25, 0.25, size=3)
        weight = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * radius ** 2))
        out += tint[:, None, None] * weight[None]
    return out


def normals_from_height(height: np.ndarray) -> np.ndarray:
    """Unit normals normalize(-h_x, -h_y, 1) of a height field, shape (3, R, R)."""
    h_y, h_x = np.gradient(height)
    n = np.stack([-h_x, -h_y, np.ones_like(height)])
    return n / np.linalg.norm(n, axis=0, keepdims=True)


def gen_reflectance(seed: int, R: int, specular_channels: int = 1) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Generate (A_d, A_s, N) for one synthetic material.

    Args:
        seed: Material seed; identical seeds give identical maps
        R: Square resolution
        specular_channels: 1 for monochrome specular albedo, 3 for tinted

    Returns:
        A_d (3, R, R) in [0, 1], A_s (specular_channels, R, R) in [0, 0.6],
        N (3, R, R) unit normals with positive z
    """
    rng = make_rng(seed, "reflectance")

    base = rng.uniform(0.2, 0.8, size=3)
    octaves = int(rng.integers(2, 5))
    variation = np.stack([octave_noise(rng, R, octaves) for _ in range(3)])
    A_d = base[:, None, None] + 0.25 * variation + _blotches(rng, R, int(rng.integers(2, 7)))
    A_d = np.clip(A_d, 0.0, 1.0)

    spec = octave_noise(rng, R, 2)
    spec = (spec - spec.min()) / max(float(np.ptp(spec)), 1e-12)
    A_s = SPECULAR_MAX * rng.uniform(0.3, 1.0) * spec[None]
    if specular_channels == 3:
        A_s = np.clip(A_s * rng.uniform(0.85, 1.15, size=(3, 1, 1)), 0.0, SPECULAR_MAX)

    height = ndimage.gaussian_filter(rng.standard_normal((R, R)), sigma=R / 8.0, mode="wrap")
    height *= rng.uniform(1.0, 4.0) * R / 8.0 / max(float(np.abs(height).max()), 1e-12)
    N = normals_from_height(height)
    return A_d, A_s, N
