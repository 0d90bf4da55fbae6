"""
Guided Samplers

Four ways of completing a stack whose texture is partially observed:

- score_sde: reverse step, then overwrite observed texels with the
  observation noised to the new timestep
- repaint: score_sde with each timestep repeated `repaint_n` times,
  re-noising t-1 -> t between repetitions
- mcg: score_sde plus a step against the unit-normalised gradient of the
  known-region error of the clean prediction, applied to every unknown
  value (unobserved texture and all reflectance channels)
- mcg_ddim: mcg over a DDIM timestep subsequence

Random streams: x_T and every reverse-step draw come from `rng` itself, the
noised observation from substream 1 and RePaint re-noising from substream 2.
With an empty mask every sampler therefore follows the unconditional chain
of the same seed exactly.
"""

import math
import time
from typing import Callable, Dict, List, Optional

import numpy as np
from tqdm import tqdm

from app.core.exceptions import NonFiniteError, ResolutionError
from app.core.logging import get_logger
from app.core.settings import settings
from app.modules.denoiser import Denoiser
from app.modules.diffusion import (
    NoiseSchedule,
    ddim_timesteps,
    ddim_update,
    ddpm_posterior,
    ddpm_step,
    predict_x0,
)
from app.modules.inpaint.schemas import InpaintConfig, InpaintResult, Observation
from app.modules.ndtensor import Tape, Tensor, get_dtype, ops
from app.modules.ndtensor.random import make_rng, normal, normal_array, substream
from app.modules.synthdata import ChannelLayout, ReflectanceQuad
from app.monitoring.prometheus import get_sampler_latency

logger = get_logger(__name__)

GRADIENT_FLOOR = 1e-12


class _Run:
    """Per-run state shared by the samplers."""

    def __init__(
        self,
        model: Denoiser,
        obs: Observation,
        s: NoiseSchedule,
        cfg: InpaintConfig,
        rng: np.random.Generator,
    ) -> None:
        config = model.config
        if obs.channels != config.in_channels:
            raise ResolutionError(
                "observation channels do not match the model",
                details={"observation": obs.channels, "model": config.in_channels},
            )
        if obs.resolution % config.resolution_multiple:
            raise ResolutionError(
                f"resolution must be divisible by {config.resolution_multiple}",
                details={"resolution": obs.resolution},
            )
        self.model = model.view(cfg.algorithm)
        self.obs = obs
        self.s = s
        self.cfg = cfg
        self.rng = rng
        self.known_rng = substream(rng, 1)
        self.renoise_rng = substream(rng, 2)
        self.shape = (1,) + obs.x0_known.shape
        self.known = obs.x0_known[None].astype(get_dtype())
        self.mask = obs.mask.channel_mask(obs.channels)[None]
        self.weight = self.mask.astype(get_dtype())
        self.known_tensor = Tensor(self.known)

    def noised_known(self, t: int) -> np.ndarray:
        """Observation forward-noised to timestep t (t = 0 is the observation)."""
        ab = self.s.alpha_bar(t)
        z = normal_array(self.known_rng, self.shape)
        return math.sqrt(ab) * self.known + math.sqrt(1.0 - ab) * z

    def replace(self, x: np.ndarray, known: np.ndarray) -> Tensor:
        return Tensor._from_array(np.where(self.mask, known, x))

    def guidance(self, x: Tensor, t: int) -> tuple:
        """
        Noise estimate at x and the unit-normalised gradient of
        ||(x0_known - x0_hat) * m||^2 with respect to x.
        """
        with Tape() as tape:
            eps_hat = self.model(x, t)
            x0_hat = predict_x0(x, eps_hat, t, self.s)
            loss = ops.squared_error_sum(x0_hat, self.known_tensor, weight=self.weight)
            (grad,) = tape.gradient(loss, [x])
        self.model.note_backward()
        g = grad.data
        norm = float(np.linalg.norm(g))
        if norm >= GRADIENT_FLOOR:
            g = g / norm
        return eps_hat, g, loss.item()

    def check(self, x: Tensor, step: int) -> None:
        if not np.all(np.isfinite(x.data)):
            raise NonFiniteError(
                f"{self.cfg.algorithm} produced non-finite values at step {step}",
                details={"algorithm": self.cfg.algorithm},
                step=step,
            )

    def progress(self, steps: List[int]):
        return tqdm(
            steps,
            desc=self.cfg.algorithm,
            disable=not settings.logging.PROGRESS_BARS,
            leave=False,
        )


def _score_sde(run: _Run) -> Tensor:
    x = normal(run.rng, run.shape)
    for t in run.progress(list(range(run.s.T, 0, -1))):
        proposal = ddpm_step(run.model, x, t, run.s, run.rng)
        x = run.replace(proposal.data, run.noised_known(t - 1))
        run.check(x, t)
    return x


def _repaint(run: _Run) -> Tensor:
    n = run.cfg.repaint_n
    x = normal(run.rng, run.shape)
    for t in run.progress(list(range(run.s.T, 0, -1))):
        beta = run.s.beta(t)
        for r in range(n):
            proposal = ddpm_step(run.model, x, t, run.s, run.rng)
            x = run.replace(proposal.data, run.noised_known(t - 1))
            if r < n - 1:
                z = normal_array(run.renoise_rng, run.shape)
                x = Tensor._from_array(math.sqrt(1.0 - beta) * x.data + math.sqrt(beta) * z)
        run.check(x, t)
    return x


def _mcg(run: _Run) -> Tensor:
    scale = run.cfg.mcg_scale
    x = normal(run.rng, run.shape)
    for t in run.progress(list(range(run.s.T, 0, -1))):
        eps_hat, g, _ = run.guidance(x, t)
        proposal = ddpm_posterior(x, eps_hat, t, run.s, run.rng)
        x = run.replace(proposal.data - scale * g, run.noised_known(t - 1))
        run.check(x, t)
    return x


def _mcg_ddim(run: _Run) -> Tensor:
    scale = run.cfg.mcg_scale
    sequence = ddim_timesteps(run.s.T, run.cfg.resolved_steps(run.s.T))
    x = normal(run.rng, run.shape)
    for i, t in enumerate(run.progress(sequence)):
        t_prev = sequence[i + 1] if i + 1 < len(sequence) else 0
        eps_hat, g, _ = run.guidance(x, t)
        proposal = ddim_update(x, eps_hat, t, t_prev, run.cfg.ddim_eta, run.s, run.rng)
        x = run.replace(proposal.data - scale * g, run.noised_known(t_prev))
        run.check(x, t)
    return x


SAMPLERS: Dict[str, Callable[[_Run], Tensor]] = {
    "score_sde": _score_sde,
    "repaint": _repaint,
    "mcg": _mcg,
    "mcg_ddim": _mcg_ddim,
}


def _execute(
    model: Denoiser,
    obs: Observation,
    s: NoiseSchedule,
    cfg: InpaintConfig,
    rng: np.random.Generator,
) -> InpaintResult:
    steps = cfg.resolved_steps(s.T)
    run = _Run(model, obs, s, cfg, rng)
    started = time.perf_counter()
    x = SAMPLERS[cfg.algorithm](run)
    # Observed texels come straight from the float64 observation.
    stack = np.where(run.mask, obs.x0_known[None], x.data.astype(np.float64))[0]
    seconds = time.perf_counter() - started

    if settings.monitoring.ENABLE_METRICS:
        get_sampler_latency().labels(algorithm=cfg.algorithm).observe(seconds)
    layout = ChannelLayout(specular=obs.channels - 9)
    logger.info(
        "Inpainting finished",
        extra={
            "algorithm": cfg.algorithm,
            "steps": steps,
            "forward_calls": run.model.counter.forward,
            "backward_calls": run.model.counter.backward,
            "duration_ms": seconds * 1000.0,
            "mask_fraction": obs.mask.fraction,
            "tags": ["inpaint"],
        },
    )
    return InpaintResult(
        algorithm=cfg.algorithm,
        stack=stack,
        quad=ReflectanceQuad.from_stack(stack, layout),
        forward_calls=run.model.counter.forward,
        backward_calls=run.model.counter.backward,
        seconds=seconds,
        steps=steps,
    )


def score_sde_inpaint(
    model: Denoiser,
    obs: Observation,
    s: NoiseSchedule,
    cfg: InpaintConfig,
    rng: np.random.Generator,
) -> InpaintResult:
    """Replacement sampler: T forward passes, no gradients."""
    return _execute(model, obs, s, cfg.model_copy(update={"algorithm": "score_sde"}), rng)


def repaint_inpaint(
    model: Denoiser,
    obs: Observation,
    s: NoiseSchedule,
    cfg: InpaintConfig,
    rng: np.random.Generator,
) -> InpaintResult:
    """Resampling sampler: repaint_n * T forward passes."""
    return _execute(model, obs, s, cfg.model_copy(update={"algorithm": "repaint"}), rng)


def mcg_inpaint(
    model: Denoiser,
    obs: Observation,
    s: NoiseSchedule,
    cfg: InpaintConfig,
    rng: np.random.Generator,
) -> InpaintResult:
    """Manifold-constrained gradient sampler: T forward and T backward passes."""
    return _execute(model, obs, s, cfg.model_copy(update={"algorithm": "mcg"}), rng)


def mcg_ddim_inpaint(
    model: Denoiser,
    obs: Observation,
    s: NoiseSchedule,
    cfg: InpaintConfig,
    rng: np.random.Generator,
) -> InpaintResult:
    """Gradient sampler on a DDIM subsequence: N forward and N backward passes."""
    return _execute(model, obs, s, cfg.model_copy(update={"algorithm": "mcg_ddim"}), rng)


def inpaint(
    model: Denoiser,
    obs: Observation,
    s: NoiseSchedule,
    cfg: InpaintConfig,
    rng: Optional[np.random.Generator] = None,
) -> InpaintResult:
    """
    Run the sampler named by `cfg.algorithm`.

    Without an explicit generator the run draws from the stream keyed by
    `cfg.seed` and the algorithm name.
    """
    rng = rng if rng is not None else make_rng(cfg.seed, f"inpaint-{cfg.algorithm}")
    return _execute(model, obs, s, cfg, rng)
