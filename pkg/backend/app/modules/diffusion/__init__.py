"""Noise schedule, forward/reverse steps, training and checkpoints."""

from app.modules.diffusion.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from app.modules.diffusion.process import (
    DiffusionSample,
    ddim_step,
    ddim_timesteps,
    ddim_update,
    ddpm_posterior,
    ddpm_step,
    draw_sample,
    forward_sample,
    predict_x0,
    sample_chain,
    training_loss,
)
from app.modules.diffusion.schedule import NoiseSchedule, make_schedule
from app.modules.diffusion.training import Adam, train

__all__ = [
    "Adam",
    "Checkpoint",
    "DiffusionSample",
    "NoiseSchedule",
    "ddim_step",
    "ddim_timesteps",
    "ddim_update",
    "ddpm_posterior",
    "ddpm_step",
    "draw_sample",
    "forward_sample",
    "load_checkpoint",
    "make_schedule",
    "predict_x0",
    "sample_chain",
    "save_checkpoint",
    "training_loss",
]
