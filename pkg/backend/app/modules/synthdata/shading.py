"""
Blinn-Phong shading and albedo augmentation.
"""

from typing import Sequence

import numpy as np
from skimage.exposure import match_histograms

from app.core.exceptions import ShapeError
from app.modules.synthdata.schemas import LightSpec

DEFAULT_VIEW = (0.0, 0.0, 1.0)


def blinn_phong(
    A_d: np.ndarray,
    A_s: np.ndarray,
    normals: np.ndarray,
    light: LightSpec,
    view: Sequence[float] = DEFAULT_VIEW,
) -> np.ndarray:
    """
    Shade along the leading channel axis.

    Works on any trailing shape: UV maps (C, R, R) or flat pixel lists
    (C, P). Returns the texture clamped to [0, 1].
    """
    to_light = np.asarray(light.direction, dtype=np.float64)
    v = np.asarray(view, dtype=np.float64)
    if abs(float(np.linalg.norm(v)) - 1.0) > 1e-6:
        raise ValueError("view direction must be unit length")
    h = to_light + v
    h = h / max(float(np.linalg.norm(h)), 1e-12)

    n_dot_l = np.maximum(np.tensordot(to_light, normals, axes=(0, 0)), 0.0)
    n_dot_h = np.maximum(np.tensordot(h, normals, axes=(0, 0)), 0.0)
    diffuse = A_d * (light.ambient + light.diffuse_intensity * n_dot_l)[None]
    specular = light.specular_intensity * A_s * (n_dot_h ** light.shininess)[None]
    return np.clip(diffuse + specular, 0.0, 1.0)


def shade_uv(
    A_d: np.ndarray,
    A_s: np.ndarray,
    N: np.ndarray,
    light: LightSpec,
    view: Sequence[float] = DEFAULT_VIEW,
) -> np.ndarray:
    """
    Shaded texture T of a set of UV maps under `light`.

    Raises:
        ShapeError: If the maps do not share a resolution
    """
    if not (A_d.shape[1:] == A_s.shape[1:] == N.shape[1:]):
        raise ShapeError(
            "maps must share a resolution",
            details={"A_d": A_d.shape, "A_s": A_s.shape, "N": N.shape},
        )
    return blinn_phong(A_d, A_s, N, light, view)


def histogram_match(A_d: np.ndarray, reference_A_d: np.ndarray) -> np.ndarray:
    """
    Remap each channel of `A_d` onto the empirical distribution of the
    matching channel of `reference_A_d`. A constant reference channel maps
    to that constant.
    """
    if A_d.shape[0] != reference_A_d.shape[0]:
        raise ShapeError(
            "channel counts differ",
            details={"A_d": A_d.shape, "reference": reference_A_d.shape},
        )
    out = np.empty(A_d.shape, dtype=np.float64)
    for c in range(A_d.shape[0]):
        ref = reference_A_d[c]
        if np.ptp(ref) == 0.0:
            out[c] = ref.flat[0]
        else:
            out[c] = match_histograms(A_d[c], ref)
    return np.clip(out, 0.0, 1.0)
