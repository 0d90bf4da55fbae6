"""
Settings Module

This module manages all application configuration using Pydantic v2 Settings.
Includes configurations for:
- Tensor engine precision and checked mode
- Diffusion schedule and training
- Denoiser architecture
- Inpainting sampler defaults
- Synthetic data generation
- Logging and metrics
"""

import io
from functools import lru_cache
from pathlib import Path
from typing import Dict, Optional

from dotenv import load_dotenv
from dotenv.parser import parse_stream
from pydantic import Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.exceptions import ConfigurationError

# Load environment variables from .env file if present
load_dotenv()


class TensorConfig(BaseSettings):
    """Tensor engine configuration."""

    PRECISION: str = Field(default="float32", pattern="^(float32|float64)$")
    CHECKED: bool = Field(default=False)

    model_config = SettingsConfigDict(env_prefix="TENSOR_")


class DiffusionConfig(BaseSettings):
    """Noise schedule and training configuration."""

    T: int = Field(default=1000, ge=2)
    BETA_START: float = Field(default=1e-4, gt=0.0, lt=1.0)
    BETA_END: float = Field(default=0.02, gt=0.0, lt=1.0)

    # Training
    LR: float = Field(default=1e-4, gt=0.0)
    BATCH_SIZE: int = Field(default=16, ge=1)
    TRAIN_STEPS: int = Field(default=20000, ge=0)
    CHECKPOINT_EVERY: int = Field(default=1000, ge=1)
    CHECKPOINT_DIR: Path = Field(default=Path("checkpoints"))

    @model_validator(mode="after")
    def validate_betas(self) -> "DiffusionConfig":
        if self.BETA_START > self.BETA_END:
            raise ValueError("BETA_START must not exceed BETA_END")
        return self

    model_config = SettingsConfigDict(env_prefix="DIFFUSION_")


class DenoiserSettings(BaseSettings):
    """Denoiser architecture defaults."""

    IN_CHANNELS: int = Field(default=10, ge=1)
    BASE_WIDTH: int = Field(default=32, ge=8)
    DEPTH: int = Field(default=3, ge=1)
    TIME_DIM: int = Field(default=64, ge=2)

    model_config = SettingsConfigDict(env_prefix="DENOISER_")


class InpaintSettings(BaseSettings):
    """Guided sampler defaults."""

    ALGORITHM: str = Field(default="mcg", pattern="^(score_sde|repaint|mcg|mcg_ddim)$")
    STEPS: Optional[int] = None
    REPAINT_N: int = Field(default=10, ge=1)
    MCG_SCALE: float = Field(default=1.0, ge=0.0)
    DDIM_ETA: float = Field(default=1.0, ge=0.0, le=1.0)
    DDIM_STEPS: int = Field(default=200, ge=1)
    SEED: int = Field(default=0, ge=0)

    model_config = SettingsConfigDict(env_prefix="INPAINT_")


class DataConfig(BaseSettings):
    """Synthetic dataset configuration."""

    RESOLUTION: int = Field(default=32, ge=4)
    COUNT: int = Field(default=2048, ge=1)
    SEED: int = Field(default=0, ge=0)
    HISTOGRAM_MATCH_PROB: float = Field(default=0.3, ge=0.0, le=1.0)
    RELIGHT: bool = Field(default=True)
    DATASET_PATH: Path = Field(default=Path("data/quads.ndt"))

    model_config = SettingsConfigDict(env_prefix="DATA_")


class LoggingConfig(BaseSettings):
    """Logging configuration."""

    LEVEL: str = Field(default="INFO")
    JSON_LOGS: bool = Field(default=True)
    LOG_FILE_PATH: Optional[Path] = None
    PROGRESS_BARS: bool = Field(default=False)

    model_config = SettingsConfigDict(env_prefix="LOG_")


class MonitoringConfig(BaseSettings):
    """Process-local metrics configuration."""

    ENABLE_METRICS: bool = Field(default=True)

    model_config = SettingsConfigDict(env_prefix="MONITORING_")


class AppSettings(BaseSettings):
    """Main settings class combining all configuration sections."""

    tensor: TensorConfig = TensorConfig()
    diffusion: DiffusionConfig = DiffusionConfig()
    denoiser: DenoiserSettings = DenoiserSettings()
    inpaint: InpaintSettings = InpaintSettings()
    data: DataConfig = DataConfig()
    logging: LoggingConfig = LoggingConfig()
    monitoring: MonitoringConfig = MonitoringConfig()

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        case_sensitive=True,
        extra="ignore",
    )


@lru_cache()
def get_settings() -> AppSettings:
    """
    Create cached settings instance.

    Returns:
        Cached AppSettings instance
    """
    return AppSettings()


def read_flat_config(path: Path) -> Dict[str, str]:
    """
    Parse a flat ``key = value`` configuration file with the dotenv parser.

    Quoting, ``#`` comments and blank lines follow dotenv rules; variables
    are not interpolated. Keys are normalised to lower case with dashes
    turned into underscores so that they line up with CLI flag names.

    Raises:
        ConfigurationError: If the file is missing or a line is malformed
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"Cannot read config file {path}", details=str(e)) from e

    values: Dict[str, str] = {}
    for binding in parse_stream(io.StringIO(text)):
        if binding.error or (binding.key is not None and binding.value is None):
            raise ConfigurationError(
                f"{path}: expected 'key = value'", details=binding.original.string.strip()
            )
        if binding.key is None:
            continue
        values[binding.key.lower().replace("-", "_")] = binding.value
    return values


settings = get_settings()
