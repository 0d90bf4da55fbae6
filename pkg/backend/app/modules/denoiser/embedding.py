"""
Sinusoidal timestep embedding.
"""

from typing import Sequence, Union

import numpy as np

from app.modules.ndtensor import Tensor


class TimeEmbedding:
    """
    Maps integer timesteps t to [sin(t * w_k), cos(t * w_k)] with
    geometrically spaced frequencies w_k = max_period ** (-k / half).
    """

    def __init__(self, dim: int, max_period: float = 10000.0) -> None:
        if dim < 2 or dim % 2:
            raise ValueError(f"embedding dim must be a positive even number, got {dim}")
        self.dim = dim
        half = dim // 2
        self.frequencies = max_period ** (-np.arange(half, dtype=np.float64) / half)

    def __call__(self, t: Union[int, Sequence[int], np.ndarray]) -> Tensor:
        steps = np.atleast_1d(np.asarray(t, dtype=np.float64))
        angles = steps[:, None] * self.frequencies[None, :]
        return Tensor(np.concatenate([np.sin(angles), np.cos(angles)], axis=1))
