"""
Image Utility Module

8-bit PNG read/write for UV maps, masks and rendered images using Pillow.
Maps are stored channel-first (C, H, W) in [0, 1]; images are (H, W, 3).
"""

from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from app.core.exceptions import ShapeError

PathLike = Union[str, Path]


def to_uint8(values: np.ndarray) -> np.ndarray:
    return np.round(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(path: PathLike, values: np.ndarray) -> Path:
    """
    Write an array in [0, 1] as PNG.

    Accepts (H, W), (H, W, 3), or channel-first (1, H, W) / (3, H, W).
    A single-channel map is written as grayscale.
    """
    array = np.asarray(values, dtype=np.float64)
    if array.ndim == 3 and array.shape[0] in (1, 3) and array.shape[-1] not in (1, 3):
        array = np.moveaxis(array, 0, -1)
    if array.ndim == 3 and array.shape[-1] == 1:
        array = array[..., 0]
    if array.ndim not in (2, 3) or (array.ndim == 3 and array.shape[-1] != 3):
        raise ShapeError("expected a grayscale or RGB image", details={"shape": list(np.shape(values))})

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(array)).save(path, format="PNG")
    return path


def load_png(path: PathLike) -> np.ndarray:
    """Read a PNG as an (H, W, 3) float64 image in [0, 1]."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0


def load_mask(path: PathLike) -> np.ndarray:
    """Read a PNG as a boolean (H, W) mask; any non-zero gray level counts as set."""
    with Image.open(path) as img:
        return np.asarray(img.convert("L")) > 0
