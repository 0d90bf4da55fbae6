"""Time-conditioned noise predictor."""

from app.modules.denoiser.embedding import TimeEmbedding
from app.modules.denoiser.network import (
    Denoiser,
    EvaluationCounter,
    eps_theta,
    init_params,
    parameter_count,
    parameter_shapes,
)
from app.modules.denoiser.schemas import DenoiserConfig

__all__ = [
    "Denoiser",
    "DenoiserConfig",
    "EvaluationCounter",
    "TimeEmbedding",
    "eps_theta",
    "init_params",
    "parameter_count",
    "parameter_shapes",
]
