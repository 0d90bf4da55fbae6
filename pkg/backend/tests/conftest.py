"""
Test Configuration

This module contains shared fixtures and configuration for tests.
"""

from typing import Iterator

import numpy as np
import pytest

from app.modules.denoiser import Denoiser, DenoiserConfig
from app.modules.diffusion import NoiseSchedule, make_schedule
from app.modules.ndtensor import precision
from app.modules.ndtensor.random import make_rng

# Small schedule used wherever a full T=1000 chain would be too slow
TEST_T = 100
TEST_BETA_START = 1e-3
TEST_BETA_END = 0.2
TEST_RESOLUTION = 8


@pytest.fixture(autouse=True)
def float64_mode(request: pytest.FixtureRequest) -> Iterator[None]:
    """Run every test in 64-bit precision unless it is marked float32."""
    name = "float32" if request.node.get_closest_marker("float32") else "float64"
    with precision(name):
        yield


@pytest.fixture
def schedule() -> NoiseSchedule:
    """The T=100 test schedule."""
    return make_schedule(TEST_T, TEST_BETA_START, TEST_BETA_END)


@pytest.fixture
def tiny_config() -> DenoiserConfig:
    """One-level denoiser over the 10-channel stack."""
    return DenoiserConfig(in_channels=10, base_width=8, depth=1, time_dim=16, groups=4)


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator."""
    return make_rng(1234, "test")


@pytest.fixture
def zero_model(tiny_config: DenoiserConfig) -> Denoiser:
    """Untrained denoiser whose output convolution is zero, so eps_hat == 0."""
    return Denoiser.initialise(tiny_config, make_rng(7, "init"), zero_output=True)


@pytest.fixture
def random_model(tiny_config: DenoiserConfig) -> Denoiser:
    """Untrained denoiser with every parameter random, including the output layer."""
    return Denoiser.initialise(tiny_config, make_rng(7, "init"), zero_output=False)
