"""
Training Module

Minimises the simplified noise-prediction objective with Adam. Every random
draw (batch indices, timesteps, noise) comes from the passed generator in a
fixed order, so identical seeds give bitwise-identical checkpoints.
"""

import math
from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from tqdm import tqdm

from app.core.exceptions import DatasetError, TrainingDivergedError
from app.core.logging import get_logger, log_duration
from app.core.settings import settings
from app.modules.denoiser import Denoiser
from app.modules.diffusion.checkpoint import Checkpoint, save_checkpoint
from app.modules.diffusion.process import training_loss
from app.modules.diffusion.schedule import NoiseSchedule
from app.modules.ndtensor import Tape, Tensor
from app.modules.ndtensor.random import normal
from app.monitoring.prometheus import get_training_loss

logger = get_logger(__name__)


class Adam:
    """Adam with bias correction, holding first and second moments per parameter."""

    def __init__(self, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, params: Dict[str, Tensor], grads: Dict[str, np.ndarray]) -> Dict[str, Tensor]:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        updated: Dict[str, Tensor] = OrderedDict()
        for name, p in params.items():
            g = grads[name]
            m = self.m.get(name, np.zeros_like(g))
            v = self.v.get(name, np.zeros_like(g))
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            value = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            updated[name] = Tensor._from_array(value, name=name)
        return updated


def train(
    model: Denoiser,
    dataset: np.ndarray,
    steps: int,
    batch: int,
    lr: float,
    rng: np.random.Generator,
    schedule: NoiseSchedule,
    checkpoint_dir: Optional[Path] = None,
    checkpoint_every: Optional[int] = None,
    seed: Optional[int] = None,
    channel_split: Optional[List[int]] = None,
) -> Checkpoint:
    """
    Train `model` in place and return the final checkpoint.

    Args:
        model: Network to optimise; its parameters are replaced each step
        dataset: Array (N, C, H, W) in the [-1, 1] working range
        steps: Optimiser steps; 0 returns the initialisation unchanged
        batch: Examples per step, drawn uniformly with replacement
        lr: Adam learning rate
        rng: Source of every random draw
        schedule: Noise schedule for t ~ U{1..T}
        checkpoint_dir: Where periodic checkpoints go; None disables them
        checkpoint_every: Period of the periodic writes

    Raises:
        DatasetError: If the dataset is empty
        TrainingDivergedError: If the loss becomes non-finite
    """
    data = np.asarray(dataset)
    if data.ndim != 4 or data.shape[0] == 0:
        raise DatasetError("Training needs a non-empty (N, C, H, W) dataset", details={"shape": data.shape})

    every = checkpoint_every or settings.diffusion.CHECKPOINT_EVERY
    optimiser = Adam(lr=lr)
    history: List[float] = []
    names = list(model.params.keys())

    def snapshot(step: int) -> Checkpoint:
        return Checkpoint.from_model(
            model, schedule, step=step, seed=seed,
            channel_split=channel_split, loss_history=np.asarray(history),
        )

    progress = tqdm(
        range(1, steps + 1),
        desc="train",
        disable=not settings.logging.PROGRESS_BARS,
        leave=False,
    )
    with log_duration(logger, "training", steps=steps, batch=batch):
        for step in progress:
            idx = rng.integers(0, data.shape[0], size=batch)
            t = rng.integers(1, schedule.T + 1, size=batch)
            x0 = Tensor(data[idx])
            eps = normal(rng, x0.shape)

            with Tape() as tape:
                loss = training_loss(model, x0, t, eps, schedule)
                grads = tape.gradient(loss, model.parameter_list())
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDivergedError(
                    f"Loss became non-finite at step {step}",
                    details={"loss": value},
                    step=step,
                )
            model.note_backward()
            model.params = optimiser.step(model.params, dict(zip(names, (g.data for g in grads))))
            history.append(value)

            if settings.monitoring.ENABLE_METRICS:
                get_training_loss().set(value)
            if step % 100 == 0 or step == steps:
                recent = float(np.mean(history[-100:]))
                progress.set_postfix(loss=f"{recent:.4f}")
                logger.info("Training progress", extra={"step": step, "loss": recent, "tags": ["train"]})
            if checkpoint_dir is not None and step % every == 0 and step != steps:
                save_checkpoint(Path(checkpoint_dir) / f"step_{step:06d}.ndt", snapshot(step))

    final = snapshot(steps)
    if checkpoint_dir is not None:
        save_checkpoint(Path(checkpoint_dir) / "final.ndt", final)
    return final
