"""
Guided Sampler Tests

This module tests the four inpainting samplers: exact preservation of the
observation, reduction to unconditional sampling under an empty mask,
network pass accounting and reproducibility.
"""

import numpy as np
import pytest

from app.core.exceptions import ResolutionError
from app.modules.denoiser import Denoiser
from app.modules.diffusion import NoiseSchedule, sample_chain
from app.modules.inpaint import (
    InpaintConfig,
    Observation,
    VisibilityMask,
    inpaint,
    mcg_ddim_inpaint,
    mcg_inpaint,
    repaint_inpaint,
    score_sde_inpaint,
)
from app.modules.inpaint.samplers import _Run
from app.modules.ndtensor import Tensor
from app.modules.ndtensor.random import make_rng
from app.modules.synthdata import gen_reflectance, shade_uv
from app.modules.synthdata.dataset import canonical_light

DDIM_STEPS = 10


@pytest.fixture
def observation() -> Observation:
    """Shaded 8x8 texture with its left half observed."""
    A_d, A_s, N = gen_reflectance(2, 8)
    grid = np.zeros((8, 8), dtype=np.uint8)
    grid[:, :4] = 1
    return Observation.from_texture(shade_uv(A_d, A_s, N, canonical_light()), VisibilityMask(grid))


@pytest.fixture
def empty_observation() -> Observation:
    """Observation with nothing visible."""
    return Observation(np.zeros((10, 8, 8)), VisibilityMask.empty(8))


def _config(algorithm: str, **overrides) -> InpaintConfig:
    values = dict(algorithm=algorithm, repaint_n=2, mcg_scale=1.0, ddim_eta=1.0, seed=3)
    values.update(steps=DDIM_STEPS if algorithm == "mcg_ddim" else None)
    values.update(overrides)
    return InpaintConfig(**values)


@pytest.mark.parametrize("algorithm", ["score_sde", "repaint", "mcg", "mcg_ddim"])
def test_observed_texels_are_preserved_exactly(
    algorithm: str, random_model: Denoiser, observation: Observation, schedule: NoiseSchedule
):
    """Test that observed texture texels in the result equal the observation bit for bit."""
    result = inpaint(random_model, observation, schedule, _config(algorithm))
    mask = observation.mask.channel_mask(observation.channels)
    assert np.array_equal(result.stack[mask], observation.x0_known[mask])
    assert result.stack.shape == (10, 8, 8)
    assert np.all(np.isfinite(result.stack))


@pytest.mark.parametrize(
    "algorithm,forward,backward",
    [("score_sde", 100, 0), ("repaint", 200, 0), ("mcg", 100, 100), ("mcg_ddim", DDIM_STEPS, DDIM_STEPS)],
)
def test_network_pass_counts(
    algorithm: str,
    forward: int,
    backward: int,
    zero_model: Denoiser,
    observation: Observation,
    schedule: NoiseSchedule,
):
    """Test that each sampler spends exactly its analytic number of passes."""
    cfg = _config(algorithm)
    result = inpaint(zero_model, observation, schedule, cfg)
    assert (result.forward_calls, result.backward_calls) == (forward, backward)
    assert cfg.expected_calls(schedule.T) == {"forward": forward, "backward": backward}
    assert zero_model.counter.forward == 0


@pytest.mark.parametrize(
    "sampler,algorithm",
    [(score_sde_inpaint, "score_sde"), (repaint_inpaint, "repaint"), (mcg_inpaint, "mcg")],
)
def test_empty_mask_matches_ancestral_chain(
    sampler, algorithm: str, random_model: Denoiser, empty_observation: Observation, schedule: NoiseSchedule
):
    """Test that with nothing observed the full-chain samplers equal unconditional sampling."""
    cfg = _config(algorithm, repaint_n=1)
    result = sampler(random_model, empty_observation, schedule, cfg, make_rng(9, "chain"))
    reference = sample_chain(random_model, (1, 10, 8, 8), schedule, make_rng(9, "chain"))
    np.testing.assert_array_equal(result.stack, reference.numpy()[0])


@pytest.mark.parametrize("eta", [0.0, 1.0])
def test_empty_mask_mcg_ddim_matches_ddim_chain(
    eta: float, random_model: Denoiser, empty_observation: Observation, schedule: NoiseSchedule
):
    """Test that with nothing observed mcg_ddim equals DDIM sampling of the same length and eta."""
    cfg = _config("mcg_ddim", ddim_eta=eta)
    result = mcg_ddim_inpaint(random_model, empty_observation, schedule, cfg, make_rng(4))
    reference = sample_chain(random_model, (1, 10, 8, 8), schedule, make_rng(4), steps=DDIM_STEPS, eta=eta)
    np.testing.assert_array_equal(result.stack, reference.numpy()[0])


def test_repaint_resampling_changes_result(
    random_model: Denoiser, observation: Observation, schedule: NoiseSchedule
):
    """Test that repaint_n > 1 departs from the single-pass replacement sampler."""
    single = repaint_inpaint(random_model, observation, schedule, _config("repaint", repaint_n=1), make_rng(1))
    plain = score_sde_inpaint(random_model, observation, schedule, _config("score_sde"), make_rng(1))
    double = repaint_inpaint(random_model, observation, schedule, _config("repaint", repaint_n=2), make_rng(1))
    np.testing.assert_array_equal(single.stack, plain.stack)
    assert not np.allclose(double.stack, plain.stack)


@pytest.mark.parametrize("algorithm", ["score_sde", "mcg_ddim"])
def test_same_seed_reproduces(algorithm: str, random_model: Denoiser, observation: Observation, schedule: NoiseSchedule):
    """Test that the config seed alone determines the output."""
    a = inpaint(random_model, observation, schedule, _config(algorithm, seed=11))
    b = inpaint(random_model, observation, schedule, _config(algorithm, seed=11))
    c = inpaint(random_model, observation, schedule, _config(algorithm, seed=12))
    np.testing.assert_array_equal(a.stack, b.stack)
    assert not np.array_equal(a.stack, c.stack)


def test_zero_scale_mcg_matches_score_sde(
    random_model: Denoiser, observation: Observation, schedule: NoiseSchedule
):
    """Test that mcg without guidance reduces to the replacement sampler."""
    mcg = mcg_inpaint(random_model, observation, schedule, _config("mcg", mcg_scale=0.0), make_rng(6))
    sde = score_sde_inpaint(random_model, observation, schedule, _config("score_sde"), make_rng(6))
    np.testing.assert_array_equal(mcg.stack, sde.stack)


def test_guidance_gradient_is_unit_norm(random_model: Denoiser, observation: Observation, schedule: NoiseSchedule):
    """Test that the known-region gradient is normalised and touches the unobserved values."""
    run = _Run(random_model, observation, schedule, _config("mcg"), make_rng(0))
    x = Tensor(make_rng(1).standard_normal(run.shape))
    _, g, loss = run.guidance(x, 50)
    assert loss > 0.0
    assert np.linalg.norm(g) == pytest.approx(1.0)
    assert np.abs(g[~run.mask]).max() > 0.0
    assert run.model.counter.backward == 1


def test_result_decodes_to_quad(random_model: Denoiser, observation: Observation, schedule: NoiseSchedule):
    """Test that the returned quad is the decoded stack."""
    result = inpaint(random_model, observation, schedule, _config("score_sde"))
    assert result.quad.resolution == 8
    np.testing.assert_allclose(np.linalg.norm(result.quad.N, axis=0), 1.0)
    assert result.steps == schedule.T
    assert result.seconds >= 0.0


def test_channel_mismatch_rejected(random_model: Denoiser, schedule: NoiseSchedule):
    """Test that a stack with the wrong channel count raises ResolutionError."""
    obs = Observation(np.zeros((12, 8, 8)), VisibilityMask.full(8))
    with pytest.raises(ResolutionError):
        inpaint(random_model, obs, schedule, _config("score_sde"))


def test_indivisible_resolution_rejected(random_model: Denoiser, schedule: NoiseSchedule):
    """Test that a resolution the network cannot halve raises ResolutionError."""
    obs = Observation(np.zeros((10, 5, 5)), VisibilityMask.full(5))
    with pytest.raises(ResolutionError):
        inpaint(random_model, obs, schedule, _config("score_sde"))


@pytest.mark.float32
@pytest.mark.parametrize("algorithm", ["score_sde", "mcg"])
def test_observed_texels_preserved_in_float32(
    algorithm: str, random_model: Denoiser, observation: Observation, schedule: NoiseSchedule
):
    """Test that observed texels stay exact when the chain runs in 32-bit precision."""
    result = inpaint(random_model, observation, schedule, _config(algorithm))
    mask = observation.mask.channel_mask(observation.channels)
    assert result.stack.dtype == np.float64
    assert np.array_equal(result.stack[mask], observation.x0_known[mask])


def test_full_length_mcg_ddim_tracks_mcg(random_model: Denoiser, observation: Observation, schedule: NoiseSchedule):
    """Test that mcg_ddim over every timestep with eta=1 follows the mcg trajectory for a shared seed."""
    ddim = mcg_ddim_inpaint(
        random_model, observation, schedule, _config("mcg_ddim", steps=schedule.T, ddim_eta=1.0), make_rng(5)
    )
    mcg = mcg_inpaint(random_model, observation, schedule, _config("mcg"), make_rng(5))
    other = mcg_inpaint(random_model, observation, schedule, _config("mcg"), make_rng(6))
    unknown = ~observation.mask.channel_mask(observation.channels)
    assert ddim.forward_calls == mcg.forward_calls == schedule.T
    tracked = np.linalg.norm(ddim.stack[unknown] - mcg.stack[unknown])
    unrelated = np.linalg.norm(other.stack[unknown] - mcg.stack[unknown])
    assert tracked < 0.5 * unrelated


@pytest.mark.parametrize("algorithm", ["score_sde", "mcg"])
def test_reflectance_content_of_observation_is_ignored(
    algorithm: str, random_model: Denoiser, observation: Observation, schedule: NoiseSchedule
):
    """Test that reflectance channels in the observation have no effect on the output."""
    noisy = observation.x0_known.copy()
    noisy[3:] = make_rng(8, "reflectance").uniform(-1.0, 1.0, size=noisy[3:].shape)
    altered = Observation(noisy, observation.mask)
    assert altered.digest() == observation.digest()
    a = inpaint(random_model, observation, schedule, _config(algorithm))
    b = inpaint(random_model, altered, schedule, _config(algorithm))
    np.testing.assert_array_equal(a.stack, b.stack)
