"""
Forward and reverse diffusion steps.

`ddpm_posterior` and `ddim_update` take a precomputed noise estimate so the
guided samplers can reuse the prediction made under a gradient tape instead
of evaluating the network twice. `ddpm_step` and `ddim_step` are the
convenience forms that call the model themselves.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.exceptions import ScheduleError, ShapeError
from app.modules.denoiser import Denoiser
from app.modules.diffusion.schedule import NoiseSchedule
from app.modules.ndtensor import Tensor, ops
from app.modules.ndtensor.random import normal, normal_array

Timesteps = Union[int, Sequence[int], np.ndarray]


@dataclass(frozen=True)
class DiffusionSample:
    """A noised sample x_t together with its timestep and the noise used."""

    x_t: Tensor
    t: int
    eps: Optional[Tensor] = None


def forward_sample(x0: Tensor, t: Timesteps, eps: Tensor, s: NoiseSchedule) -> Tensor:
    """
    Sample x_t directly from x_0: sqrt(ab_t) * x0 + sqrt(1 - ab_t) * eps.

    `t` may be one timestep or one per batch element (axis 0).

    Raises:
        ShapeError: If eps and x0 differ in shape
        ScheduleError: If any t lies outside {1..T}
    """
    if eps.shape != x0.shape:
        raise ShapeError("eps must match x0", details={"x0": x0.shape, "eps": eps.shape})
    steps = np.atleast_1d(np.asarray(t, dtype=np.int64))
    if steps.size == 1:
        ab = s.alpha_bar(s.check_t(int(steps[0])))
        return ops.add(ops.scale(x0, math.sqrt(ab)), ops.scale(eps, math.sqrt(1.0 - ab)))
    if steps.shape != (x0.shape[0],):
        raise ShapeError("need one timestep per batch element", details={"t": steps.shape, "x0": x0.shape})
    ab = s.alpha_bar_array(steps).reshape((-1,) + (1,) * (x0.ndim - 1))
    return Tensor._from_array(np.sqrt(ab) * x0.data + np.sqrt(1.0 - ab) * eps.data)


def draw_sample(x0: Tensor, t: int, s: NoiseSchedule, rng: np.random.Generator) -> DiffusionSample:
    """Draw eps from `rng` and noise `x0` to timestep `t`."""
    t = s.check_t(t)
    eps = normal(rng, x0.shape)
    return DiffusionSample(x_t=forward_sample(x0, t, eps, s), t=t, eps=eps)


def predict_x0(x_t: Tensor, eps_hat: Tensor, t: int, s: NoiseSchedule) -> Tensor:
    """
    Clean-sample estimate (x_t - sqrt(1 - ab_t) * eps_hat) / sqrt(ab_t).

    Built from taped ops so gradients flow back to x_t.
    """
    if x_t.shape != eps_hat.shape:
        raise ShapeError("x_t and eps_hat must match", details={"x_t": x_t.shape, "eps": eps_hat.shape})
    ab = s.alpha_bar(s.check_t(t))
    return ops.scale(ops.sub(x_t, ops.scale(eps_hat, math.sqrt(1.0 - ab))), 1.0 / math.sqrt(ab))


def ddpm_posterior(
    x_t: Tensor,
    eps_hat: Tensor,
    t: int,
    s: NoiseSchedule,
    rng: np.random.Generator,
) -> Tensor:
    """
    Draw x_{t-1} ~ N(mu, beta_t I) with
    mu = (x_t - beta_t / sqrt(1 - ab_t) * eps_hat) / sqrt(alpha_t).

    No noise is drawn at t = 1, so the last step returns the mean.
    """
    t = s.check_t(t)
    beta, alpha, ab = s.beta(t), s.alpha(t), s.alpha_bar(t)
    coef = beta / math.sqrt(1.0 - ab)
    mean = (x_t.data - coef * eps_hat.data) / math.sqrt(alpha)
    if t > 1:
        mean = mean + math.sqrt(beta) * normal_array(rng, x_t.shape)
    return Tensor._from_array(mean)


def ddpm_step(
    model: Denoiser,
    x_t: Tensor,
    t: int,
    s: NoiseSchedule,
    rng: np.random.Generator,
) -> Tensor:
    """One ancestral reverse step with fixed variance beta_t."""
    t = s.check_t(t)
    return ddpm_posterior(x_t, model(x_t, t), t, s, rng)


def ddim_sigma(t: int, t_prev: int, eta: float, s: NoiseSchedule) -> float:
    ab_t, ab_prev = s.alpha_bar(t), s.alpha_bar(t_prev)
    return eta * math.sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * math.sqrt(1.0 - ab_t / ab_prev)


def _check_ddim(t: int, t_prev: int, eta: float, s: NoiseSchedule) -> Tuple[int, int]:
    t = s.check_t(t)
    t_prev = s.check_t(t_prev, allow_zero=True)
    if t_prev >= t:
        raise ScheduleError("DDIM requires t_prev < t", details={"t": t, "t_prev": t_prev})
    if not 0.0 <= eta <= 1.0:
        raise ScheduleError("eta must lie in [0, 1]", details={"eta": eta})
    return t, t_prev


def ddim_update(
    x_t: Tensor,
    eps_hat: Tensor,
    t: int,
    t_prev: int,
    eta: float,
    s: NoiseSchedule,
    rng: np.random.Generator,
) -> Tensor:
    """
    DDIM transition from t to t_prev (t_prev = 0 means the clean sample).

    eta = 0 is deterministic and draws nothing from `rng`.
    """
    t, t_prev = _check_ddim(t, t_prev, eta, s)
    ab_prev = s.alpha_bar(t_prev)
    sigma = ddim_sigma(t, t_prev, eta, s)
    x0_hat = predict_x0(x_t, eps_hat, t, s).data
    direction = math.sqrt(max(1.0 - ab_prev - sigma * sigma, 0.0))
    x_prev = math.sqrt(ab_prev) * x0_hat + direction * eps_hat.data
    if sigma > 0.0:
        x_prev = x_prev + sigma * normal_array(rng, x_t.shape)
    return Tensor._from_array(x_prev)


def ddim_step(
    model: Denoiser,
    x_t: Tensor,
    t: int,
    t_prev: int,
    eta: float,
    s: NoiseSchedule,
    rng: np.random.Generator,
) -> Tensor:
    """One DDIM step; uses `predict_x0` internally."""
    t, t_prev = _check_ddim(t, t_prev, eta, s)
    return ddim_update(x_t, model(x_t, t), t, t_prev, eta, s, rng)


def ddim_timesteps(T: int, N: int) -> List[int]:
    """
    Uniform descending subsequence of N timesteps from {1..T}.

    N = T yields every timestep; the first entry is always T.
    """
    if not 1 <= N <= T:
        raise ScheduleError("need 1 <= N <= T", details={"N": N, "T": T})
    if N == 1:
        return [int(T)]
    steps = np.unique(np.round(np.linspace(1, T, N)).astype(np.int64))
    return [int(t) for t in steps[::-1]]


def training_loss(
    model: Denoiser,
    x0: Tensor,
    t: Timesteps,
    eps: Tensor,
    s: NoiseSchedule,
) -> Tensor:
    """Mean squared error between the true noise and the model's estimate."""
    if x0.ndim != 4 or x0.shape[1] != model.config.in_channels:
        raise ShapeError(
            "x0 channels must match the model",
            details={"x0": x0.shape, "in_channels": model.config.in_channels},
        )
    x_t = forward_sample(x0, t, eps, s)
    return ops.mse(eps, model(x_t, t))


def sample_chain(
    model: Denoiser,
    shape: Tuple[int, ...],
    s: NoiseSchedule,
    rng: np.random.Generator,
    steps: Optional[int] = None,
    eta: float = 0.0,
) -> Tensor:
    """
    Unconditional sampling from pure noise.

    With `steps` unset the full T-step ancestral chain runs; otherwise a
    DDIM subsequence of that length is used with the given `eta`.
    """
    x = normal(rng, shape)
    if steps is None:
        for t in range(s.T, 0, -1):
            x = ddpm_step(model, x, t, s, rng)
        return x
    sequence = ddim_timesteps(s.T, steps)
    for i, t in enumerate(sequence):
        t_prev = sequence[i + 1] if i + 1 < len(sequence) else 0
        x = ddim_step(model, x, t, t_prev, eta, s, rng)
    return x
