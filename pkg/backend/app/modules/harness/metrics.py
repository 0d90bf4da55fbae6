"""
Image Quality Metrics

PSNR with an infinite sentinel for identical inputs, and windowed SSIM with
the canonical constants (11x11 Gaussian window, sigma 1.5, K1 = 0.01,
K2 = 0.03, dynamic range 1.0) via scikit-image.
"""

import math
from typing import Optional

import numpy as np
from skimage.metrics import structural_similarity

from app.core.exceptions import MetricError

PSNR_TABLE_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _pair(a: np.ndarray, b: np.ndarray) -> tuple:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise MetricError("images must have equal shapes", details={"a": a.shape, "b": b.shape})
    if a.size == 0:
        raise MetricError("images are empty")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """
    10 * log10(peak^2 / MSE) in dB; identical inputs give +inf.

    Raises:
        MetricError: On shape mismatch or non-positive peak
    """
    if peak <= 0.0:
        raise MetricError("peak must be positive", details={"peak": peak})
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def table_psnr(value: float) -> float:
    """PSNR clamped for tables and averages."""
    return min(value, PSNR_TABLE_CAP)


def ssim(a: np.ndarray, b: np.ndarray, channel_axis: Optional[int] = 0) -> float:
    """
    Mean SSIM over windows and channels.

    3-D inputs are channel-first maps unless `channel_axis` says otherwise;
    2-D inputs are single-channel.

    Raises:
        MetricError: On shape mismatch or a spatial side shorter than 11
    """
    a, b = _pair(a, b)
    if a.ndim == 2:
        channel_axis = None
    elif a.ndim != 3:
        raise MetricError("expected a 2-D or 3-D image", details={"shape": a.shape})
    spatial = a.shape if channel_axis is None else tuple(
        n for i, n in enumerate(a.shape) if i != channel_axis % a.ndim
    )
    if min(spatial) < SSIM_WINDOW:
        raise MetricError(
            f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}",
            details={"shape": a.shape},
        )
    return float(
        structural_similarity(
            a,
            b,
            data_range=1.0,
            gaussian_weights=True,
            sigma=SSIM_SIGMA,
            use_sample_covariance=False,
            K1=0.01,
            K2=0.03,
            channel_axis=channel_axis,
        )
    )
