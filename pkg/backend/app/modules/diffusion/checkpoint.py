"""
Checkpoint Module

A checkpoint is an NDT1 bundle: a one-line JSON header with the schedule
parameters, the model config and the training step, followed by one record
per network parameter and a trailing loss-history record.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from app.core.exceptions import CheckpointError, ContainerFormatError
from app.core.logging import get_logger
from app.modules.denoiser import Denoiser, DenoiserConfig, parameter_shapes
from app.modules.diffusion.schedule import NoiseSchedule, make_schedule
from app.modules.ndtensor import Tensor
from app.modules.ndtensor.container import load_bundle, save_bundle

logger = get_logger(__name__)

CHECKPOINT_FORMAT = "denoiser-checkpoint"
CHECKPOINT_VERSION = 1
LOSS_HISTORY = "__loss_history__"


class ScheduleSpec(BaseModel):
    T: int = Field(ge=2)
    beta_start: float
    beta_end: float


class CheckpointHeader(BaseModel):
    """Textual header stored in front of the parameter records."""

    format: str = CHECKPOINT_FORMAT
    version: int = CHECKPOINT_VERSION
    step: int = Field(default=0, ge=0)
    seed: Optional[int] = None
    schedule: ScheduleSpec
    model: DenoiserConfig
    channel_split: Optional[List[int]] = None


@dataclass
class Checkpoint:
    header: CheckpointHeader
    params: Dict[str, np.ndarray]
    loss_history: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.float64))

    @classmethod
    def from_model(
        cls,
        model: Denoiser,
        schedule: NoiseSchedule,
        step: int = 0,
        seed: Optional[int] = None,
        channel_split: Optional[List[int]] = None,
        loss_history: Optional[np.ndarray] = None,
    ) -> "Checkpoint":
        header = CheckpointHeader(
            step=step,
            seed=seed,
            schedule=ScheduleSpec(**schedule.describe()),
            model=model.config,
            channel_split=channel_split,
        )
        history = np.asarray(loss_history if loss_history is not None else [], dtype=np.float64)
        return cls(header=header, params=model.state_arrays(), loss_history=history)

    @property
    def step(self) -> int:
        return self.header.step

    def schedule(self) -> NoiseSchedule:
        spec = self.header.schedule
        return make_schedule(spec.T, spec.beta_start, spec.beta_end)

    def to_model(self, label: str = "default") -> Denoiser:
        """Rebuild the network in the current tensor precision."""
        params = {name: Tensor(array, name=name) for name, array in self.params.items()}
        return Denoiser(self.header.model, params, label=label)

    def require_channels(self, channel_split: List[int]) -> None:
        """
        Raises:
            CheckpointError: If the checkpoint was trained on another layout
        """
        expected = sum(channel_split)
        if self.header.model.in_channels != expected or (
            self.header.channel_split is not None and list(self.header.channel_split) != list(channel_split)
        ):
            raise CheckpointError(
                "Checkpoint channel layout does not match",
                details={"checkpoint": self.header.channel_split, "expected": list(channel_split)},
            )


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> Path:
    tensors: Dict[str, np.ndarray] = dict(checkpoint.params)
    tensors[LOSS_HISTORY] = np.asarray(checkpoint.loss_history, dtype=np.float64)
    save_bundle(path, checkpoint.header.model_dump(mode="json"), tensors)
    logger.info(
        "Checkpoint written",
        extra={"path": str(path), "step": checkpoint.step, "tags": ["checkpoint"]},
    )
    return Path(path)


def load_checkpoint(path: Path) -> Checkpoint:
    """
    Read and validate a checkpoint bundle.

    Raises:
        CheckpointError: If the file is unreadable or does not describe a
            complete parameter set for its declared architecture
    """
    try:
        raw_header, tensors = load_bundle(path)
    except ContainerFormatError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}", details=e.message) from e

    raw_header.pop("names", None)
    if raw_header.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError("Not a denoiser checkpoint", details={"format": raw_header.get("format")})
    try:
        header = CheckpointHeader(**raw_header)
    except ValidationError as e:
        raise CheckpointError("Invalid checkpoint header", details=str(e)) from e

    history = tensors.pop(LOSS_HISTORY, np.zeros(0, dtype=np.float64))
    expected = parameter_shapes(header.model)
    if list(tensors.keys()) != list(expected.keys()):
        raise CheckpointError("Checkpoint parameters do not match the declared architecture")
    for name, shape in expected.items():
        if tensors[name].shape != tuple(shape):
            raise CheckpointError(
                f"Parameter {name} has wrong shape",
                details={"expected": shape, "actual": tensors[name].shape},
            )
    return Checkpoint(header=header, params=tensors, loss_history=history)


def checkpoint_summary(checkpoint: Checkpoint) -> Dict[str, Any]:
    history = checkpoint.loss_history
    tail = history[-100:]
    return {
        "step": checkpoint.step,
        "parameters": int(sum(a.size for a in checkpoint.params.values())),
        "schedule": checkpoint.header.schedule.model_dump(),
        "recent_loss": float(tail.mean()) if tail.size else None,
    }
