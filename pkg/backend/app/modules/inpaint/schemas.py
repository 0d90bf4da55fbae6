"""
Inpainting Schemas

Visibility masks, observations, sampler configuration and results.
"""

import hashlib
from dataclasses import dataclass, field
from typing import Dict, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field

from app.core.exceptions import ResolutionError, ScheduleError, ShapeError
from app.core.settings import settings
from app.modules.synthdata import ChannelLayout, ReflectanceQuad

TEXTURE_CHANNELS = 3

Algorithm = Literal["score_sde", "repaint", "mcg", "mcg_ddim"]
ALGORITHMS = ("score_sde", "repaint", "mcg", "mcg_ddim")


@dataclass(frozen=True, eq=False)
class VisibilityMask:
    """
    Binary UV grid, 1 where the texture was observed.

    The mask covers the three texture channels only; reflectance channels
    are always unknown.
    """

    grid: np.ndarray

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid)
        if grid.ndim != 2:
            raise ShapeError("mask grid must be 2-D", details={"shape": grid.shape})
        if not np.isin(grid, (0, 1)).all():
            raise ValueError("mask values must be 0 or 1")
        frozen = grid.astype(bool)
        frozen.flags.writeable = False
        object.__setattr__(self, "grid", frozen)

    @classmethod
    def full(cls, R: int) -> "VisibilityMask":
        return cls(np.ones((R, R), dtype=np.uint8))

    @classmethod
    def empty(cls, R: int) -> "VisibilityMask":
        return cls(np.zeros((R, R), dtype=np.uint8))

    @property
    def shape(self) -> tuple:
        return self.grid.shape

    @property
    def fraction(self) -> float:
        return float(self.grid.mean())

    def channel_mask(self, channels: int) -> np.ndarray:
        """Boolean (channels, H, W) mask, true only on observed texture texels."""
        out = np.zeros((channels,) + self.grid.shape, dtype=bool)
        out[:TEXTURE_CHANNELS] = self.grid
        return out


@dataclass(frozen=True, eq=False)
class Observation:
    """
    Known texture in the [-1, 1] working range, laid out as a full stack.

    Only the texture channels of `x0_known` are read; whatever the
    reflectance channels hold is discarded on construction.
    """

    x0_known: np.ndarray
    mask: VisibilityMask

    def __post_init__(self) -> None:
        x0 = np.asarray(self.x0_known, dtype=np.float64)
        if x0.ndim != 3 or x0.shape[0] < TEXTURE_CHANNELS:
            raise ShapeError("x0_known must be (C, H, W)", details={"shape": x0.shape})
        if x0.shape[1:] != self.mask.shape:
            raise ResolutionError(
                "mask resolution does not match the observation",
                details={"mask": self.mask.shape, "x0_known": x0.shape},
            )
        known = np.zeros_like(x0)
        known[:TEXTURE_CHANNELS] = np.where(self.mask.grid, x0[:TEXTURE_CHANNELS], 0.0)
        if np.abs(known).max(initial=0.0) > 1.0:
            raise ValueError("observed texture must lie in [-1, 1]")
        known.flags.writeable = False
        object.__setattr__(self, "x0_known", known)

    @classmethod
    def from_texture(
        cls,
        texture: np.ndarray,
        mask: VisibilityMask,
        layout: ChannelLayout = ChannelLayout(),
    ) -> "Observation":
        """Build from a (3, H, W) texture in [0, 1]."""
        texture = np.clip(np.asarray(texture, dtype=np.float64), 0.0, 1.0)
        stack = np.zeros((layout.total,) + texture.shape[1:])
        stack[:TEXTURE_CHANNELS] = 2.0 * texture - 1.0
        return cls(stack, mask)

    @property
    def channels(self) -> int:
        return int(self.x0_known.shape[0])

    @property
    def resolution(self) -> int:
        return int(self.x0_known.shape[1])

    def digest(self) -> str:
        """Content hash used to check that samplers saw the same input."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.x0_known).tobytes())
        h.update(np.ascontiguousarray(self.mask.grid).tobytes())
        return h.hexdigest()


class InpaintConfig(BaseModel):
    """Sampler choice and its knobs."""

    algorithm: Algorithm = Field(default=settings.inpaint.ALGORITHM)
    steps: Optional[int] = Field(default=settings.inpaint.STEPS, ge=1)
    repaint_n: int = Field(default=settings.inpaint.REPAINT_N, ge=1)
    mcg_scale: float = Field(default=settings.inpaint.MCG_SCALE, ge=0.0)
    ddim_eta: float = Field(default=settings.inpaint.DDIM_ETA, ge=0.0, le=1.0)
    seed: int = Field(default=settings.inpaint.SEED, ge=0)

    def resolved_steps(self, T: int) -> int:
        """
        Number of reverse steps: T for the full-chain samplers, N for
        mcg_ddim (default N = min(DDIM_STEPS, T)).

        Raises:
            ScheduleError: If steps exceeds T, or a full-chain sampler is
                given a step count other than T
        """
        if self.algorithm == "mcg_ddim":
            n = self.steps if self.steps is not None else min(settings.inpaint.DDIM_STEPS, T)
            if n > T:
                raise ScheduleError("DDIM subsequence longer than the schedule", details={"N": n, "T": T})
            return n
        if self.steps is not None and self.steps != T:
            raise ScheduleError(
                f"{self.algorithm} runs the full chain; steps must equal T",
                details={"steps": self.steps, "T": T},
            )
        return T

    def expected_calls(self, T: int) -> Dict[str, int]:
        """Analytic forward/backward network pass counts."""
        n = self.resolved_steps(T)
        return {
            "score_sde": {"forward": T, "backward": 0},
            "repaint": {"forward": self.repaint_n * T, "backward": 0},
            "mcg": {"forward": T, "backward": T},
            "mcg_ddim": {"forward": n, "backward": n},
        }[self.algorithm]


@dataclass
class InpaintResult:
    """
    Completed stack plus bookkeeping.

    `stack` is the float64 (C, H, W) sample in the working range; its masked texture
    texels equal the observation bit for bit. `quad` is the decoded maps.
    """

    algorithm: str
    stack: np.ndarray
    quad: ReflectanceQuad
    forward_calls: int
    backward_calls: int
    seconds: float
    steps: int
    extras: Dict[str, float] = field(default_factory=dict)
