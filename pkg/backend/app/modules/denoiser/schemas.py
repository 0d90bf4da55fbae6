"""
Denoiser Schemas

Pydantic models describing the denoiser architecture.
"""

from typing import List

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.settings import settings


class DenoiserConfig(BaseModel):
    """Architecture of the U-shaped noise predictor."""

    in_channels: int = Field(default=settings.denoiser.IN_CHANNELS, ge=1)
    base_width: int = Field(default=settings.denoiser.BASE_WIDTH, ge=1)
    depth: int = Field(default=settings.denoiser.DEPTH, ge=1)
    time_dim: int = Field(default=settings.denoiser.TIME_DIM, ge=2)
    groups: int = Field(default=8, ge=1)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_widths(self) -> "DenoiserConfig":
        if self.base_width % self.groups != 0:
            raise ValueError(
                f"base_width ({self.base_width}) must be divisible by groups ({self.groups})"
            )
        if self.time_dim % 2 != 0:
            raise ValueError("time_dim must be even")
        return self

    @property
    def widths(self) -> List[int]:
        """Channel width per resolution level, doubling each level."""
        return [self.base_width * 2 ** level for level in range(self.depth)]

    @property
    def resolution_multiple(self) -> int:
        return 2 ** self.depth
