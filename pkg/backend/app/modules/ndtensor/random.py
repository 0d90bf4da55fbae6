"""
Counter-based random streams.

Every stochastic operation draws from an explicitly passed
`numpy.random.Generator` backed by Philox. Streams are derived from a run
seed and a stream name, so two runs with the same seed reproduce every draw
bit for bit regardless of scheduling order.
"""

import zlib
from typing import Tuple

import numpy as np

from app.modules.ndtensor.tensor import Tensor, get_dtype


def make_rng(seed: int, name: str = "") -> np.random.Generator:
    """Philox generator keyed by (seed, name)."""
    spawn_key: Tuple[int, ...] = (zlib.crc32(name.encode("utf-8")),) if name else ()
    sequence = np.random.SeedSequence(int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(sequence))


def substream(rng: np.random.Generator, index: int) -> np.random.Generator:
    """
    Independent stream derived from `rng` without consuming from it.

    Philox jumps advance the counter by 2**128 per index, so substreams
    never overlap the parent.
    """
    if index < 1:
        raise ValueError("substream index must be >= 1")
    return np.random.Generator(rng.bit_generator.jumped(index))


def normal(rng: np.random.Generator, shape: Tuple[int, ...]) -> Tensor:
    """Standard normal tensor in the current precision."""
    return Tensor._from_array(rng.standard_normal(size=shape, dtype=get_dtype()))


def normal_array(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    return rng.standard_normal(size=shape, dtype=get_dtype())
