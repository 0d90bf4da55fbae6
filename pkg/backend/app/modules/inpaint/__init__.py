"""Guided completion of partially observed texture/reflectance stacks."""

from app.modules.inpaint.samplers import (
    SAMPLERS,
    inpaint,
    mcg_ddim_inpaint,
    mcg_inpaint,
    repaint_inpaint,
    score_sde_inpaint,
)
from app.modules.inpaint.schemas import (
    ALGORITHMS,
    InpaintConfig,
    InpaintResult,
    Observation,
    VisibilityMask,
)

__all__ = [
    "ALGORITHMS",
    "InpaintConfig",
    "InpaintResult",
    "Observation",
    "SAMPLERS",
    "VisibilityMask",
    "inpaint",
    "mcg_ddim_inpaint",
    "mcg_inpaint",
    "repaint_inpaint",
    "score_sde_inpaint",
]
