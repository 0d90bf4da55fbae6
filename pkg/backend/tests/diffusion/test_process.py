"""
Forward and Reverse Process Tests

This module tests the closed-form forward sample, the DDPM and DDIM
transitions and unconditional sampling chains.
"""

import math

import numpy as np
import pytest

from app.core.exceptions import ScheduleError, ShapeError
from app.modules.denoiser import Denoiser
from app.modules.diffusion import (
    NoiseSchedule,
    ddim_step,
    ddim_update,
    ddpm_posterior,
    ddpm_step,
    draw_sample,
    forward_sample,
    predict_x0,
    sample_chain,
    training_loss,
)
from app.modules.ndtensor import Tensor
from app.modules.ndtensor.random import make_rng


@pytest.fixture
def x0() -> Tensor:
    """Fixed clean sample in [-1, 1]."""
    return Tensor(np.linspace(-1.0, 1.0, 10 * 8 * 8).reshape(1, 10, 8, 8))


def test_forward_sample_formula(schedule: NoiseSchedule, x0: Tensor):
    """Test forward_sample against sqrt(ab) x0 + sqrt(1 - ab) eps."""
    eps = Tensor(make_rng(0).standard_normal(x0.shape))
    ab = schedule.alpha_bar(40)
    expected = math.sqrt(ab) * x0.numpy() + math.sqrt(1.0 - ab) * eps.numpy()
    np.testing.assert_allclose(forward_sample(x0, 40, eps, schedule).numpy(), expected)


def test_forward_sample_statistics(schedule: NoiseSchedule):
    """Test that repeated draws of x_t have mean sqrt(ab) x0 and variance 1 - ab within 2%."""
    x0_value = 0.7
    draws = 100_000
    rng = make_rng(21, "forward")
    for t in (10, 50, 100):
        ab = schedule.alpha_bar(t)
        x0 = Tensor(np.full((draws,), x0_value))
        x_t = draw_sample(x0, t, schedule, rng).x_t.numpy()
        assert x_t.mean() == pytest.approx(math.sqrt(ab) * x0_value, abs=0.02 * max(math.sqrt(ab) * x0_value, 1.0))
        assert x_t.var() == pytest.approx(1.0 - ab, rel=0.02)


def test_forward_sample_per_element_timesteps(schedule: NoiseSchedule, x0: Tensor):
    """Test that a timestep per batch element noises each element separately."""
    batch = Tensor(np.concatenate([x0.numpy(), x0.numpy()]))
    eps = Tensor(make_rng(1).standard_normal(batch.shape))
    out = forward_sample(batch, np.array([5, 90]), eps, schedule).numpy()
    np.testing.assert_allclose(out[1:], forward_sample(Tensor(batch.numpy()[1:]), 90, Tensor(eps.numpy()[1:]), schedule).numpy())


def test_forward_sample_shape_errors(schedule: NoiseSchedule, x0: Tensor):
    """Test shape and range validation in forward_sample."""
    with pytest.raises(ShapeError):
        forward_sample(x0, 3, Tensor(np.zeros((1, 10, 4, 4))), schedule)
    with pytest.raises(ScheduleError):
        forward_sample(x0, 0, Tensor(np.zeros(x0.shape)), schedule)


def test_predict_x0_inverts_forward_sample(schedule: NoiseSchedule, x0: Tensor):
    """Test that predict_x0 recovers x0 given the true noise."""
    eps = Tensor(make_rng(2).standard_normal(x0.shape))
    x_t = forward_sample(x0, 70, eps, schedule)
    np.testing.assert_allclose(predict_x0(x_t, eps, 70, schedule).numpy(), x0.numpy(), atol=1e-10)


def test_ddpm_last_step_draws_no_noise(schedule: NoiseSchedule, x0: Tensor):
    """Test that the t=1 posterior returns its mean and leaves the rng untouched."""
    rng, reference = make_rng(4), make_rng(4)
    eps = Tensor(np.zeros(x0.shape))
    out = ddpm_posterior(x0, eps, 1, schedule, rng)
    np.testing.assert_allclose(out.numpy(), x0.numpy() / math.sqrt(schedule.alpha(1)))
    assert rng.standard_normal() == reference.standard_normal()


def test_ddim_eta_zero_draws_nothing(schedule: NoiseSchedule, x0: Tensor):
    """Test that deterministic DDIM consumes no random numbers."""
    rng, reference = make_rng(5), make_rng(5)
    eps = Tensor(make_rng(6).standard_normal(x0.shape))
    ddim_update(x0, eps, 50, 40, 0.0, schedule, rng)
    assert rng.standard_normal() == reference.standard_normal()


def test_ddim_to_zero_returns_x0_estimate(schedule: NoiseSchedule, x0: Tensor):
    """Test that a DDIM step to t_prev=0 returns predict_x0."""
    eps = Tensor(make_rng(7).standard_normal(x0.shape))
    out = ddim_update(x0, eps, 30, 0, 1.0, schedule, make_rng(0))
    np.testing.assert_allclose(out.numpy(), predict_x0(x0, eps, 30, schedule).numpy(), atol=1e-12)


def test_ddim_matches_ddpm_at_final_step(schedule: NoiseSchedule, x0: Tensor):
    """Test that DDIM from t=1 to 0 equals the noiseless DDPM step exactly."""
    eps = Tensor(make_rng(8).standard_normal(x0.shape))
    ddim = ddim_update(x0, eps, 1, 0, 1.0, schedule, make_rng(0))
    ddpm = ddpm_posterior(x0, eps, 1, schedule, make_rng(0))
    np.testing.assert_allclose(ddim.numpy(), ddpm.numpy(), atol=1e-10)


def test_ddim_eta_one_close_to_ddpm(schedule: NoiseSchedule, x0: Tensor):
    """Test that eta=1 single steps stay within 5% relative L2 of DDPM with shared noise."""
    eps = Tensor(make_rng(9).standard_normal(x0.shape))
    ddim = ddim_update(x0, eps, 50, 49, 1.0, schedule, make_rng(3)).numpy()
    ddpm = ddpm_posterior(x0, eps, 50, schedule, make_rng(3)).numpy()
    assert np.linalg.norm(ddim - ddpm) / np.linalg.norm(ddpm) < 0.05


def test_ddim_validates_arguments(schedule: NoiseSchedule, x0: Tensor):
    """Test that DDIM rejects t_prev >= t and eta outside [0, 1]."""
    eps = Tensor(np.zeros(x0.shape))
    with pytest.raises(ScheduleError):
        ddim_update(x0, eps, 10, 10, 0.0, schedule, make_rng(0))
    with pytest.raises(ScheduleError):
        ddim_update(x0, eps, 10, 5, 1.5, schedule, make_rng(0))


def test_ddim_step_calls_model_once(schedule: NoiseSchedule, zero_model: Denoiser, x0: Tensor):
    """Test that one DDIM step costs exactly one network evaluation."""
    model = zero_model.view("count")
    ddim_step(model, x0, 20, 10, 0.0, schedule, make_rng(0))
    assert model.counter.forward == 1


def test_ddpm_step_uses_model_prediction(schedule: NoiseSchedule, zero_model: Denoiser, x0: Tensor):
    """Test that a DDPM step equals the posterior step on the model's eps_hat, at one call."""
    model = zero_model.view("count")
    out = ddpm_step(model, x0, 30, schedule, make_rng(4))
    expected = ddpm_posterior(x0, Tensor(np.zeros(x0.shape)), 30, schedule, make_rng(4))
    np.testing.assert_allclose(out.numpy(), expected.numpy(), atol=1e-12)
    assert model.counter.forward == 1
    with pytest.raises(ScheduleError):
        ddpm_step(model, x0, 0, schedule, make_rng(4))


def test_deterministic_chain_with_zero_model(schedule: NoiseSchedule, zero_model: Denoiser):
    """Test that eta=0 DDIM with eps_hat == 0 rescales x_T by 1/sqrt(ab_T)."""
    shape = (1, 10, 8, 8)
    x_T = make_rng(10).standard_normal(shape)
    out = sample_chain(zero_model, shape, schedule, make_rng(10), steps=10, eta=0.0)
    np.testing.assert_allclose(out.numpy(), x_T / math.sqrt(schedule.alpha_bar(schedule.T)), rtol=1e-9)


def test_sample_chain_is_reproducible(schedule: NoiseSchedule, random_model: Denoiser):
    """Test that the same seed reproduces the ancestral chain bit for bit."""
    a = sample_chain(random_model, (1, 10, 8, 8), schedule, make_rng(11)).numpy()
    b = sample_chain(random_model, (1, 10, 8, 8), schedule, make_rng(11)).numpy()
    np.testing.assert_array_equal(a, b)


def test_full_chain_evaluates_model_T_times(schedule: NoiseSchedule, zero_model: Denoiser):
    """Test that the ancestral chain calls the network once per timestep."""
    model = zero_model.view("chain")
    sample_chain(model, (1, 10, 8, 8), schedule, make_rng(0))
    assert model.counter.forward == schedule.T


def test_training_loss_zero_model_is_noise_power(schedule: NoiseSchedule, zero_model: Denoiser, x0: Tensor):
    """Test that with eps_hat == 0 the loss equals the mean squared noise."""
    eps = Tensor(make_rng(12).standard_normal(x0.shape))
    loss = training_loss(zero_model, x0, 25, eps, schedule)
    assert loss.item() == pytest.approx(float(np.mean(eps.numpy() ** 2)))


def test_training_loss_rejects_channel_mismatch(schedule: NoiseSchedule, zero_model: Denoiser):
    """Test that x0 must carry the model's channel count."""
    with pytest.raises(ShapeError):
        training_loss(zero_model, Tensor(np.zeros((1, 3, 8, 8))), 5, Tensor(np.zeros((1, 3, 8, 8))), schedule)
