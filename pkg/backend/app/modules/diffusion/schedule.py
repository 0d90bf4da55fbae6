"""
Noise Schedule

Timesteps are 1-based: t ranges over {1..T}. Arrays are stored 0-based, so
the value for timestep t lives at index t - 1. `alpha_bar(0)` is defined as
1 (the clean signal), which lets samplers treat the last step uniformly.
"""

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.exceptions import ScheduleError


class NoiseSchedule(BaseModel):
    """Per-timestep beta, alpha and cumulative alpha tables."""

    T: int = Field(ge=2)
    beta_start: float
    beta_end: float
    betas: Any
    alphas: Any
    alpha_bars: Any

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @model_validator(mode="after")
    def validate_tables(self) -> "NoiseSchedule":
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.shape != (self.T,):
            raise ValueError(f"betas must have length T={self.T}")
        if not np.all((betas > 0.0) & (betas < 1.0)):
            raise ValueError("betas must lie strictly inside (0, 1)")
        if not np.array_equal(np.asarray(self.alphas), 1.0 - betas):
            raise ValueError("alphas must equal 1 - betas")
        if not np.array_equal(np.asarray(self.alpha_bars), np.cumprod(1.0 - betas)):
            raise ValueError("alpha_bars must equal the cumulative product of alphas")
        if not np.all(np.diff(self.alpha_bars) < 0):
            raise ValueError("alpha_bars must be strictly decreasing")
        return self

    def check_t(self, t: int, allow_zero: bool = False) -> int:
        t = int(t)
        low = 0 if allow_zero else 1
        if not low <= t <= self.T:
            raise ScheduleError(
                f"timestep {t} outside {{{low}..{self.T}}}",
                details={"t": t, "T": self.T},
            )
        return t

    def beta(self, t: int) -> float:
        return float(self.betas[self.check_t(t) - 1])

    def alpha(self, t: int) -> float:
        return float(self.alphas[self.check_t(t) - 1])

    def alpha_bar(self, t: int) -> float:
        t = self.check_t(t, allow_zero=True)
        return 1.0 if t == 0 else float(self.alpha_bars[t - 1])

    def alpha_bar_array(self, t: np.ndarray) -> np.ndarray:
        """Vectorised alpha_bar for an integer array of timesteps in {1..T}."""
        t = np.asarray(t, dtype=np.int64)
        if t.size and (t.min() < 1 or t.max() > self.T):
            raise ScheduleError("timesteps outside schedule range", details={"T": self.T})
        return self.alpha_bars[t - 1]

    def describe(self) -> dict:
        return {"T": self.T, "beta_start": self.beta_start, "beta_end": self.beta_end}


def make_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """
    Linear beta schedule including both endpoints.

    Raises:
        ScheduleError: Unless 0 < beta_start <= beta_end < 1 and T >= 2
    """
    if int(T) < 2:
        raise ScheduleError("T must be at least 2", details={"T": T})
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ScheduleError(
            "require 0 < beta_start <= beta_end < 1",
            details={"beta_start": beta_start, "beta_end": beta_end},
        )
    betas = np.linspace(beta_start, beta_end, int(T), dtype=np.float64)
    alphas = 1.0 - betas
    return NoiseSchedule(
        T=int(T),
        beta_start=float(beta_start),
        beta_end=float(beta_end),
        betas=betas,
        alphas=alphas,
        alpha_bars=np.cumprod(alphas),
    )
