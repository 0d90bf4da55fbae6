"""
Differentiable Operations

Each operation computes its forward result with NumPy, wraps it in a new
`Tensor` and, when a tape is active, records a closure producing the input
gradients from the output gradient. The forward computation is identical
whether or not a tape is recording.

Broadcasting is limited to scalars, plus the explicit per-channel
`bias_add`.
"""

from typing import Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.core.exceptions import ShapeError
from app.modules.ndtensor.tape import record
from app.modules.ndtensor.tensor import Tensor, as_tensor

Scalar = Union[float, int]

ELEMENTWISE_OPS = ("add", "sub", "mul", "scale", "silu", "relu")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def elementwise(op: str, a: Tensor, b: Union[Tensor, Scalar, None] = None) -> Tensor:
    """
    Elementwise add/sub/mul/scale/silu/relu.

    `b` must be a tensor of identical shape or a Python scalar; `silu` and
    `relu` ignore it.

    Raises:
        ShapeError: On mismatched tensor shapes
        ValueError: On an unknown op name
    """
    if op not in ELEMENTWISE_OPS:
        raise ValueError(f"Unknown elementwise op {op!r}")
    a = as_tensor(a)

    if op == "silu":
        sig = _sigmoid(a.data)
        out = Tensor._from_array(a.data * sig)
        record("silu", [a], out, lambda g: (g * (sig * (1.0 + a.data * (1.0 - sig))),))
        return out

    if op == "relu":
        positive = a.data > 0
        out = Tensor._from_array(np.where(positive, a.data, 0.0))
        record("relu", [a], out, lambda g: (g * positive,))
        return out

    if b is None:
        raise ValueError(f"Elementwise op {op!r} needs a second operand")

    if op == "scale" or not isinstance(b, Tensor):
        if isinstance(b, Tensor):
            raise ShapeError("scale expects a scalar factor", details={"shape": b.shape})
        c = float(b)
        if op in ("scale", "mul"):
            out = Tensor._from_array(a.data * c)
            record(op, [a], out, lambda g: (g * c,))
        elif op == "add":
            out = Tensor._from_array(a.data + c)
            record(op, [a], out, lambda g: (g,))
        else:
            out = Tensor._from_array(a.data - c)
            record(op, [a], out, lambda g: (g,))
        return out

    if a.shape != b.shape:
        raise ShapeError(
            f"Elementwise {op} requires equal shapes",
            details={"a": a.shape, "b": b.shape},
        )
    if op == "add":
        out = Tensor._from_array(a.data + b.data)
        record(op, [a, b], out, lambda g: (g, g))
    elif op == "sub":
        out = Tensor._from_array(a.data - b.data)
        record(op, [a, b], out, lambda g: (g, -g))
    else:
        out = Tensor._from_array(a.data * b.data)
        record(op, [a, b], out, lambda g: (g * b.data, g * a.data))
    return out


def add(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    return elementwise("add", a, b)


def sub(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    return elementwise("sub", a, b)


def mul(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    return elementwise("mul", a, b)


def scale(a: Tensor, c: Scalar) -> Tensor:
    return elementwise("scale", a, c)


def silu(a: Tensor) -> Tensor:
    return elementwise("silu", a)


def relu(a: Tensor) -> Tensor:
    return elementwise("relu", a)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product of 2-D tensors.

    Raises:
        ShapeError: If either operand is not 2-D or inner dimensions differ
    """
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul dimension mismatch", details={"a": a.shape, "b": b.shape})
    out = Tensor._from_array(a.data @ b.data)
    record("matmul", [a, b], out, lambda g: (g @ b.data.T, a.data.T @ g))
    return out


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    try:
        data = a.data.reshape(shape)
    except ValueError as e:
        raise ShapeError("Cannot reshape", details={"from": a.shape, "to": shape}) from e
    out = Tensor._from_array(data.copy())
    original = a.shape
    record("reshape", [a], out, lambda g: (g.reshape(original),))
    return out


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Concatenate along `axis`; all other extents must agree."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    ndim = tensors[0].ndim
    axis = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(
            t.shape[d] != tensors[0].shape[d] for d in range(ndim) if d != axis
        ):
            raise ShapeError("concat shape mismatch", details=[t.shape for t in tensors])
    out = Tensor._from_array(np.concatenate([t.data for t in tensors], axis=axis))
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def backward(g: np.ndarray):
        index = [slice(None)] * ndim
        grads = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            index[axis] = slice(int(lo), int(hi))
            grads.append(g[tuple(index)])
        return grads

    record("concat", tensors, out, backward)
    return out


def slice_axis(a: Tensor, start: int, stop: int, axis: int = 1) -> Tensor:
    """Contiguous slice `[start:stop]` along one axis."""
    axis = axis % a.ndim
    if not 0 <= start < stop <= a.shape[axis]:
        raise ShapeError("slice out of range", details={"shape": a.shape, "start": start, "stop": stop})
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = Tensor._from_array(a.data[index].copy())

    def backward(g: np.ndarray):
        full = np.zeros(a.shape, dtype=g.dtype)
        full[index] = g
        return (full,)

    record("slice", [a], out, backward)
    return out


def sum(a: Tensor) -> Tensor:  # noqa: A001 - mirrors the tensor method
    out = Tensor._from_array(np.asarray(a.data.sum(dtype=a.dtype)))
    shape = a.shape
    record("sum", [a], out, lambda g: (np.full(shape, g.reshape(()), dtype=g.dtype),))
    return out


def mean(a: Tensor) -> Tensor:
    n = a.size
    out = Tensor._from_array(np.asarray(a.data.mean(dtype=a.dtype)))
    shape = a.shape
    record("mean", [a], out, lambda g: (np.full(shape, g.reshape(()) / n, dtype=g.dtype),))
    return out


def bias_add(x: Tensor, b: Tensor) -> Tensor:
    """
    Add a per-channel bias along axis 1.

    `b` has shape (C,) for a bias shared by the batch or (B, C) for one
    vector per batch element; it is broadcast over the trailing axes of `x`.
    """
    if x.ndim < 2:
        raise ShapeError("bias_add expects at least 2-D input", details={"x": x.shape})
    batch, channels = x.shape[0], x.shape[1]
    trailing = (1,) * (x.ndim - 2)
    if b.shape == (channels,):
        expanded = b.data.reshape((1, channels) + trailing)
        reduce_axes = tuple(i for i in range(x.ndim) if i != 1)
    elif b.shape == (batch, channels):
        expanded = b.data.reshape((batch, channels) + trailing)
        reduce_axes = tuple(range(2, x.ndim))
    else:
        raise ShapeError("bias shape mismatch", details={"x": x.shape, "b": b.shape})
    out = Tensor._from_array(x.data + expanded)
    b_shape = b.shape
    record(
        "bias_add",
        [x, b],
        out,
        lambda g: (g, g.sum(axis=reduce_axes).reshape(b_shape) if reduce_axes else g.reshape(b_shape)),
    )
    return out


def conv2d(
    x: Tensor,
    w: Tensor,
    stride: int = 1,
    pad: Optional[int] = None,
) -> Tensor:
    """
    2-D cross-correlation with zero padding.

    Args:
        x: Input of shape (B, C, H, W)
        w: Kernel of shape (O, C, k, k), k odd
        stride: Step between output samples
        pad: Zero padding per side; defaults to k // 2 (shape preserving)

    Raises:
        ShapeError: On channel mismatch or an even/non-square kernel
    """
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError("conv2d expects 4-D input and kernel", details={"x": x.shape, "w": w.shape})
    batch, channels, height, width = x.shape
    out_ch, in_ch, kh, kw = w.shape
    if in_ch != channels:
        raise ShapeError("conv2d channel mismatch", details={"x": x.shape, "w": w.shape})
    if kh != kw or kh % 2 == 0:
        raise ShapeError("conv2d kernel must be square with odd size", details={"w": w.shape})
    k = kh
    pad = k // 2 if pad is None else int(pad)
    stride = int(stride)

    padded = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(padded, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    out_h, out_w = windows.shape[2], windows.shape[3]
    # (B*Ho*Wo, C*k*k) column matrix
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(batch * out_h * out_w, channels * k * k)
    w_flat = w.data.reshape(out_ch, channels * k * k)
    result = (cols @ w_flat.T).reshape(batch, out_h, out_w, out_ch).transpose(0, 3, 1, 2)
    out = Tensor._from_array(result)

    def backward(g: np.ndarray):
        g_flat = g.transpose(0, 2, 3, 1).reshape(batch * out_h * out_w, out_ch)
        grad_w = (g_flat.T @ cols).reshape(w.shape)
        grad_cols = (g_flat @ w_flat).reshape(batch, out_h, out_w, channels, k, k)
        grad_padded = np.zeros(padded.shape, dtype=g.dtype)
        span_h = stride * (out_h - 1) + 1
        span_w = stride * (out_w - 1) + 1
        for i in range(k):
            for j in range(k):
                grad_padded[:, :, i:i + span_h:stride, j:j + span_w:stride] += (
                    grad_cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                )
        grad_x = grad_padded[:, :, pad:pad + height, pad:pad + width]
        return grad_x, grad_w

    record("conv2d", [x, w], out, backward)
    return out


def group_norm(
    x: Tensor,
    groups: int,
    gain: Tensor,
    bias: Tensor,
    eps: float = 1e-5,
) -> Tensor:
    """
    Group normalisation over (channels-in-group, H, W), then per-channel affine.

    Raises:
        ShapeError: If channels are not divisible by `groups`
    """
    if x.ndim != 4:
        raise ShapeError("group_norm expects 4-D input", details={"x": x.shape})
    batch, channels, height, width = x.shape
    if groups < 1 or channels % groups != 0:
        raise ShapeError(
            "channels must be divisible by groups",
            details={"channels": channels, "groups": groups},
        )
    if gain.shape != (channels,) or bias.shape != (channels,):
        raise ShapeError("group_norm affine shape mismatch", details={"gain": gain.shape, "bias": bias.shape})

    grouped = x.data.reshape(batch, groups, -1)
    n = grouped.shape[2]
    mu = grouped.mean(axis=2, keepdims=True)
    centered = grouped - mu
    var = (centered * centered).mean(axis=2, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (centered * inv_std).reshape(x.shape)
    g4 = gain.data.reshape(1, channels, 1, 1)
    b4 = bias.data.reshape(1, channels, 1, 1)
    out = Tensor._from_array(xhat * g4 + b4)

    def backward(g: np.ndarray):
        grad_gain = (g * xhat).sum(axis=(0, 2, 3))
        grad_bias = g.sum(axis=(0, 2, 3))
        dxhat = (g * g4).reshape(batch, groups, n)
        xh = xhat.reshape(batch, groups, n)
        grad_x = inv_std / n * (
            n * dxhat
            - dxhat.sum(axis=2, keepdims=True)
            - xh * (dxhat * xh).sum(axis=2, keepdims=True)
        )
        return grad_x.reshape(x.shape), grad_gain, grad_bias

    record("group_norm", [x, gain, bias], out, backward)
    return out


def upsample_nearest(x: Tensor, factor: int = 2) -> Tensor:
    """Nearest-neighbour upsampling of the two spatial axes."""
    if x.ndim != 4:
        raise ShapeError("upsample expects 4-D input", details={"x": x.shape})
    batch, channels, height, width = x.shape
    out = Tensor._from_array(x.data.repeat(factor, axis=2).repeat(factor, axis=3))
    record(
        "upsample",
        [x],
        out,
        lambda g: (g.reshape(batch, channels, height, factor, width, factor).sum(axis=(3, 5)),),
    )
    return out


def squared_error_sum(a: Tensor, b: Tensor, weight: Optional[np.ndarray] = None) -> Tensor:
    """sum((weight * (a - b))^2) composed from taped primitives."""
    diff = sub(a, b)
    if weight is not None:
        diff = mul(diff, Tensor(np.broadcast_to(weight, diff.shape)))
    return sum(mul(diff, diff))


def mse(a: Tensor, b: Tensor) -> Tensor:
    """Mean squared difference over all elements."""
    diff = sub(a, b)
    return mean(mul(diff, diff))

