"""Dense tensors with tape-based reverse-mode differentiation."""

from app.modules.ndtensor import ops
from app.modules.ndtensor.tape import GradientMap, Tape, active_tape, backward
from app.modules.ndtensor.tensor import (
    Tensor,
    as_tensor,
    checked_mode,
    get_dtype,
    precision,
    set_checked,
    set_precision,
)

__all__ = [
    "GradientMap",
    "Tape",
    "Tensor",
    "active_tape",
    "as_tensor",
    "backward",
    "checked_mode",
    "get_dtype",
    "ops",
    "precision",
    "set_checked",
    "set_precision",
]
