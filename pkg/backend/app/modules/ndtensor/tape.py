"""
Reverse-mode Tape

Operations executed while a `Tape` is active append a `Node` holding their
inputs, output and a closure that maps the output gradient to input
gradients. Nodes are appended in execution order, which is a topological
order of the graph; `backward` replays them in reverse.
"""

from contextvars import ContextVar, Token
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import ShapeError, TapeError
from app.modules.ndtensor.tensor import Tensor

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_active_tape: ContextVar[Optional["Tape"]] = ContextVar("active_tape", default=None)


@dataclass(frozen=True)
class Node:
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class GradientMap:
    """Gradients keyed by tensor identity."""

    def __init__(self) -> None:
        self._grads: Dict[int, Tuple[Tensor, np.ndarray]] = {}

    def accumulate(self, tensor: Tensor, grad: np.ndarray) -> None:
        key = id(tensor)
        if key in self._grads:
            # additive accumulation for tensors with several consumers
            self._grads[key] = (tensor, self._grads[key][1] + grad)
        else:
            self._grads[key] = (tensor, grad)

    def raw(self, tensor: Tensor) -> Optional[np.ndarray]:
        entry = self._grads.get(id(tensor))
        return None if entry is None else entry[1]

    def __contains__(self, tensor: Tensor) -> bool:
        return id(tensor) in self._grads

    def __getitem__(self, tensor: Tensor) -> Tensor:
        grad = self.raw(tensor)
        if grad is None:
            raise TapeError("No gradient reached this tensor", details=repr(tensor))
        return Tensor._from_array(grad)

    def __len__(self) -> int:
        return len(self._grads)


class Tape:
    """
    Ordered record of differentiable operations.

    A tape is single-threaded; use one tape per worker. Activate it with a
    ``with`` block:

        with Tape() as tape:
            loss = ...
        grads = tape.gradient(loss, [x])
    """

    def __init__(self) -> None:
        self.nodes: List[Node] = []
        self._producers: Dict[int, int] = {}
        self._consumed: Dict[int, Tensor] = {}
        self._token: Optional[Token] = None

    def __enter__(self) -> "Tape":
        if self._token is not None:
            raise TapeError("Tape is already active")
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc: object) -> None:
        if self._token is not None:
            _active_tape.reset(self._token)
            self._token = None

    def record(self, op: str, inputs: Sequence[Tensor], output: Tensor, backward: BackwardFn) -> None:
        node = Node(op=op, inputs=tuple(inputs), output=output, backward=backward)
        self._producers[id(output)] = len(self.nodes)
        for tensor in node.inputs:
            self._consumed[id(tensor)] = tensor
        self.nodes.append(node)

    def produced(self, tensor: Tensor) -> bool:
        return id(tensor) in self._producers

    def knows(self, tensor: Tensor) -> bool:
        return id(tensor) in self._producers or id(tensor) in self._consumed

    def backward(self, loss: Tensor) -> GradientMap:
        """Propagate d(loss)/d(loss) = 1 through every recorded node."""
        return backward(self, loss)

    def gradient(self, loss: Tensor, sources: Iterable[Tensor]) -> List[Tensor]:
        """Gradients of `loss` with respect to each requested tensor."""
        sources = list(sources)
        for source in sources:
            if not self.knows(source):
                raise TapeError("Requested tensor is not on this tape", details=repr(source))
        grads = backward(self, loss)
        result = []
        for source in sources:
            raw = grads.raw(source)
            if raw is None:
                raw = np.zeros(source.shape, dtype=source.dtype)
            result.append(Tensor._from_array(raw))
        return result

    def __len__(self) -> int:
        return len(self.nodes)


def active_tape() -> Optional[Tape]:
    """The tape recording on the current thread, if any."""
    return _active_tape.get()


def record(op: str, inputs: Sequence[Tensor], output: Tensor, backward_fn: BackwardFn) -> None:
    """Record an operation on the active tape; no-op when taping is off."""
    tape = _active_tape.get()
    if tape is not None:
        tape.record(op, inputs, output, backward_fn)


def backward(tape: Tape, loss: Tensor) -> GradientMap:
    """
    Reverse-mode sweep from a scalar loss.

    Raises:
        ShapeError: If the loss is not a single element
        TapeError: If the loss was not produced under this tape
    """
    if loss.size != 1:
        raise ShapeError("Loss must be a scalar", details={"shape": loss.shape})
    if not tape.produced(loss):
        raise TapeError("Loss was not produced under this tape", details=repr(loss))

    grads = GradientMap()
    grads.accumulate(loss, np.ones(loss.shape, dtype=loss.dtype))
    stop = tape._producers[id(loss)]
    for node in reversed(tape.nodes[: stop + 1]):
        upstream = grads.raw(node.output)
        if upstream is None:
            continue
        input_grads = node.backward(upstream)
        for tensor, grad in zip(node.inputs, input_grads):
            if grad is None:
                continue
            grads.accumulate(tensor, np.asarray(grad, dtype=tensor.dtype).reshape(tensor.shape))
    return grads
