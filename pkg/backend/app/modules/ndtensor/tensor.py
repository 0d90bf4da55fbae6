"""
Dense Tensor

A `Tensor` is an immutable wrapper around a contiguous NumPy array. All
differentiable operations live in `ops.py` and record themselves on the
active `Tape` (see `tape.py`); the tensor itself carries no graph state.
"""

import contextlib
from typing import Iterator, Sequence, Tuple, Union

import numpy as np

from app.core.exceptions import NonFiniteError
from app.core.settings import settings

ArrayLike = Union[np.ndarray, float, int, Sequence[float], Sequence[Sequence[float]]]

_DTYPES = {"float32": np.float32, "float64": np.float64}

_state = {
    "dtype": _DTYPES[settings.tensor.PRECISION],
    "checked": settings.tensor.CHECKED,
}


def get_dtype() -> np.dtype:
    """Current global floating dtype."""
    return np.dtype(_state["dtype"])


def set_precision(name: str) -> None:
    """Switch the global floating precision ("float32" or "float64")."""
    if name not in _DTYPES:
        raise ValueError(f"Unknown precision {name!r}; expected one of {sorted(_DTYPES)}")
    _state["dtype"] = _DTYPES[name]


def set_checked(enabled: bool) -> None:
    """Enable or disable finiteness checks on every constructed tensor."""
    _state["checked"] = bool(enabled)


@contextlib.contextmanager
def precision(name: str) -> Iterator[None]:
    """Temporarily switch the global precision."""
    previous = _state["dtype"]
    set_precision(name)
    try:
        yield
    finally:
        _state["dtype"] = previous


@contextlib.contextmanager
def checked_mode(enabled: bool = True) -> Iterator[None]:
    """Temporarily enable finiteness checks."""
    previous = _state["checked"]
    set_checked(enabled)
    try:
        yield
    finally:
        _state["checked"] = previous


class Tensor:
    """
    Dense n-dimensional array of the global floating dtype.

    Tensors are value-semantic: operations always return new tensors and
    never write into an existing buffer, so a tensor may be handed to
    another thread safely.
    """

    __slots__ = ("data", "name")
    __array_priority__ = 100

    def __init__(self, data: ArrayLike, name: str = "") -> None:
        array = np.array(data, dtype=_state["dtype"], copy=True, order="C")
        if array.ndim == 0:
            array = array.reshape(())
        if _state["checked"] and not np.all(np.isfinite(array)):
            raise NonFiniteError(
                "Tensor contains NaN or Inf",
                details={"name": name, "shape": array.shape},
            )
        array.flags.writeable = False
        self.data = array
        self.name = name

    @classmethod
    def _from_array(cls, array: np.ndarray, name: str = "") -> "Tensor":
        """Adopt a freshly computed array without copying it."""
        array = np.ascontiguousarray(array, dtype=_state["dtype"])
        if _state["checked"] and not np.all(np.isfinite(array)):
            raise NonFiniteError(
                "Operation produced NaN or Inf",
                details={"name": name, "shape": array.shape},
            )
        tensor = cls.__new__(cls)
        array.flags.writeable = False
        tensor.data = array
        tensor.name = name
        return tensor

    @classmethod
    def zeros(cls, shape: Tuple[int, ...]) -> "Tensor":
        return cls(np.zeros(shape))

    @classmethod
    def ones(cls, shape: Tuple[int, ...]) -> "Tensor":
        return cls(np.ones(shape))

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        """Writable copy of the underlying data."""
        return np.array(self.data, copy=True)

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() requires a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    # Operator sugar; the implementations live in ops.py
    def __add__(self, other: Union["Tensor", float]) -> "Tensor":
        from app.modules.ndtensor import ops
        return ops.elementwise("add", self, other)

    __radd__ = __add__

    def __sub__(self, other: Union["Tensor", float]) -> "Tensor":
        from app.modules.ndtensor import ops
        return ops.elementwise("sub", self, other)

    def __rsub__(self, other: float) -> "Tensor":
        from app.modules.ndtensor import ops
        return ops.elementwise("add", ops.elementwise("scale", self, -1.0), other)

    def __mul__(self, other: Union["Tensor", float]) -> "Tensor":
        from app.modules.ndtensor import ops
        return ops.elementwise("mul", self, other)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        from app.modules.ndtensor import ops
        return ops.elementwise("scale", self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from app.modules.ndtensor import ops
        return ops.matmul(self, other)

    def reshape(self, *shape: int) -> "Tensor":
        from app.modules.ndtensor import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def sum(self) -> "Tensor":
        from app.modules.ndtensor import ops
        return ops.sum(self)

    def mean(self) -> "Tensor":
        from app.modules.ndtensor import ops
        return ops.mean(self)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<Tensor{label} shape={self.shape} dtype={self.dtype}>"


def as_tensor(value: Union[Tensor, ArrayLike]) -> Tensor:
    """Wrap non-tensor values; tensors pass through untouched."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)
