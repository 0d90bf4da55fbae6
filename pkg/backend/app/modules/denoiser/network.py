"""
Denoiser Network

A small U-Net predicting the noise in x_t:

- stem 3x3 conv to `base_width`
- `depth` down levels, each two residual blocks then a stride-2 conv
- one residual block at the bottom
- `depth` up levels, each nearest upsampling, skip concatenation and two
  residual blocks
- group norm, SiLU and a zero-initialised 3x3 conv back to `in_channels`

Every residual block adds a learned projection of the shared time
embedding. The forward pass only uses taped ops, so gradients reach both
the parameters and the input image.
"""

import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Union

import numpy as np

from app.core.exceptions import ShapeError
from app.core.settings import settings
from app.modules.denoiser.embedding import TimeEmbedding
from app.modules.denoiser.schemas import DenoiserConfig
from app.modules.ndtensor import Tensor, ops
from app.monitoring.prometheus import get_model_evaluations

Params = Dict[str, Tensor]
Timesteps = Union[int, Sequence[int], np.ndarray]


def _block_shapes(prefix: str, cin: int, cout: int, time_dim: int) -> List[tuple]:
    shapes = [
        (f"{prefix}.norm1.gain", (cin,)),
        (f"{prefix}.norm1.bias", (cin,)),
        (f"{prefix}.conv1.w", (cout, cin, 3, 3)),
        (f"{prefix}.conv1.b", (cout,)),
        (f"{prefix}.temb.w", (time_dim, cout)),
        (f"{prefix}.temb.b", (cout,)),
        (f"{prefix}.norm2.gain", (cout,)),
        (f"{prefix}.norm2.bias", (cout,)),
        (f"{prefix}.conv2.w", (cout, cout, 3, 3)),
        (f"{prefix}.conv2.b", (cout,)),
    ]
    if cin != cout:
        shapes += [(f"{prefix}.skip.w", (cout, cin, 1, 1)), (f"{prefix}.skip.b", (cout,))]
    return shapes


def parameter_shapes(config: DenoiserConfig) -> "OrderedDict[str, tuple]":
    """Name and shape of every parameter, in creation order."""
    widths = config.widths
    td = config.time_dim
    shapes: List[tuple] = [
        ("time.l1.w", (td, td)),
        ("time.l1.b", (td,)),
        ("time.l2.w", (td, td)),
        ("time.l2.b", (td,)),
        ("stem.w", (widths[0], config.in_channels, 3, 3)),
        ("stem.b", (widths[0],)),
    ]
    cin = widths[0]
    for level, width in enumerate(widths):
        shapes += _block_shapes(f"down{level}.block0", cin, width, td)
        shapes += _block_shapes(f"down{level}.block1", width, width, td)
        shapes += [(f"down{level}.down.w", (width, width, 3, 3)), (f"down{level}.down.b", (width,))]
        cin = width
    shapes += _block_shapes("mid.block0", cin, cin, td)
    for level in reversed(range(config.depth)):
        width = widths[level]
        shapes += _block_shapes(f"up{level}.block0", cin + width, width, td)
        shapes += _block_shapes(f"up{level}.block1", width, width, td)
        cin = width
    shapes += [
        ("out.norm.gain", (widths[0],)),
        ("out.norm.bias", (widths[0],)),
        ("out.conv.w", (config.in_channels, widths[0], 3, 3)),
        ("out.conv.b", (config.in_channels,)),
    ]
    return OrderedDict(shapes)


def parameter_count(config: DenoiserConfig) -> int:
    """Closed-form number of scalars in the network."""
    td, c = config.time_dim, config.in_channels
    widths = config.widths

    def block(cin: int, cout: int) -> int:
        n = 2 * cin + 9 * cin * cout + cout + td * cout + cout + 2 * cout + 9 * cout * cout + cout
        return n + (cin * cout + cout if cin != cout else 0)

    total = 2 * (td * td + td)
    total += 9 * c * widths[0] + widths[0]
    cin = widths[0]
    for width in widths:
        total += block(cin, width) + block(width, width) + 9 * width * width + width
        cin = width
    total += block(cin, cin)
    for width in reversed(widths):
        total += block(cin + width, width) + block(width, width)
        cin = width
    total += 2 * widths[0] + 9 * widths[0] * c + c
    return total


def init_params(config: DenoiserConfig, rng: np.random.Generator, zero_output: bool = True) -> Params:
    """
    Kaiming-style initialisation.

    Weights are normal with std sqrt(2 / fan_in), biases zero, norm gains
    one. With `zero_output` the final conv is all zeros so the untrained
    model predicts eps = 0 exactly.
    """
    params: Params = OrderedDict()
    for name, shape in parameter_shapes(config).items():
        kind = name.rsplit(".", 1)[1]
        if kind == "gain":
            value = np.ones(shape)
        elif kind in ("b", "bias"):
            value = np.zeros(shape)
        elif name.startswith("out.conv") and zero_output:
            value = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:])) if len(shape) == 4 else shape[0]
            value = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
        params[name] = Tensor(value, name=name)
    return params


def _linear(x: Tensor, params: Params, prefix: str) -> Tensor:
    return ops.bias_add(ops.matmul(x, params[f"{prefix}.w"]), params[f"{prefix}.b"])


def _conv(x: Tensor, params: Params, prefix: str, stride: int = 1) -> Tensor:
    return ops.bias_add(ops.conv2d(x, params[f"{prefix}.w"], stride=stride), params[f"{prefix}.b"])


def _norm_act(x: Tensor, params: Params, prefix: str, groups: int) -> Tensor:
    return ops.silu(ops.group_norm(x, groups, params[f"{prefix}.gain"], params[f"{prefix}.bias"]))


def _res_block(x: Tensor, temb: Tensor, params: Params, prefix: str, groups: int) -> Tensor:
    h = _conv(_norm_act(x, params, f"{prefix}.norm1", groups), params, f"{prefix}.conv1")
    h = ops.bias_add(h, _linear(temb, params, f"{prefix}.temb"))
    h = _conv(_norm_act(h, params, f"{prefix}.norm2", groups), params, f"{prefix}.conv2")
    skip = _conv(x, params, f"{prefix}.skip") if f"{prefix}.skip.w" in params else x
    return ops.add(h, skip)


def eps_theta(params: Params, config: DenoiserConfig, x_t: Tensor, t: Timesteps) -> Tensor:
    """
    Predict the noise contained in `x_t` at timestep(s) `t`.

    Args:
        params: Parameter map from `init_params` or a checkpoint
        config: Architecture the parameters were built for
        x_t: Noisy batch of shape (B, C, H, W)
        t: One timestep for the whole batch or one per element

    Raises:
        ShapeError: On channel count or spatial divisibility violations
    """
    if x_t.ndim != 4 or x_t.shape[1] != config.in_channels:
        raise ShapeError(
            f"expected input (B, {config.in_channels}, H, W)",
            details={"shape": x_t.shape},
        )
    batch, _, height, width = x_t.shape
    multiple = config.resolution_multiple
    if height % multiple or width % multiple:
        raise ShapeError(
            f"spatial size must be divisible by {multiple}",
            details={"shape": x_t.shape},
        )
    steps = np.broadcast_to(np.atleast_1d(np.asarray(t)), (batch,))
    groups = config.groups

    emb = TimeEmbedding(config.time_dim)(steps)
    temb = ops.silu(_linear(emb, params, "time.l1"))
    temb = ops.silu(_linear(temb, params, "time.l2"))

    h = _conv(x_t, params, "stem")
    skips: List[Tensor] = []
    for level in range(config.depth):
        h = _res_block(h, temb, params, f"down{level}.block0", groups)
        h = _res_block(h, temb, params, f"down{level}.block1", groups)
        skips.append(h)
        h = _conv(h, params, f"down{level}.down", stride=2)

    h = _res_block(h, temb, params, "mid.block0", groups)

    for level in reversed(range(config.depth)):
        h = ops.concat([ops.upsample_nearest(h, 2), skips[level]], axis=1)
        h = _res_block(h, temb, params, f"up{level}.block0", groups)
        h = _res_block(h, temb, params, f"up{level}.block1", groups)

    h = _norm_act(h, params, "out.norm", groups)
    return _conv(h, params, "out.conv")


@dataclass
class EvaluationCounter:
    """Forward and backward pass counts, safe to bump from several threads."""

    forward: int = 0
    backward: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add(self, forward: int = 0, backward: int = 0) -> None:
        with self._lock:
            self.forward += forward
            self.backward += backward

    def reset(self) -> None:
        with self._lock:
            self.forward = 0
            self.backward = 0


class Denoiser:
    """
    Parameters plus architecture, callable as eps_theta(x_t, t).

    Parameters are read-shared; only the training loop replaces them.
    """

    def __init__(self, config: DenoiserConfig, params: Params, label: str = "default") -> None:
        expected = parameter_shapes(config)
        if list(params.keys()) != list(expected.keys()):
            raise ShapeError("parameter names do not match the architecture")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ShapeError(f"parameter {name} has wrong shape", details={
                    "expected": shape, "actual": params[name].shape,
                })
        self.config = config
        self.params: Params = OrderedDict(params)
        self.label = label
        self.counter = EvaluationCounter()

    @classmethod
    def initialise(
        cls,
        config: DenoiserConfig,
        rng: np.random.Generator,
        zero_output: bool = True,
    ) -> "Denoiser":
        return cls(config, init_params(config, rng, zero_output=zero_output))

    def view(self, label: str) -> "Denoiser":
        """Same parameters, fresh evaluation counter under another label."""
        clone = Denoiser.__new__(Denoiser)
        clone.config = self.config
        clone.params = self.params
        clone.label = label
        clone.counter = EvaluationCounter()
        return clone

    def __call__(self, x_t: Tensor, t: Timesteps) -> Tensor:
        out = eps_theta(self.params, self.config, x_t, t)
        self.counter.add(forward=1)
        if settings.monitoring.ENABLE_METRICS:
            get_model_evaluations().labels(kind="forward", algorithm=self.label).inc()
        return out

    def note_backward(self) -> None:
        """Count one gradient pass through the network."""
        self.counter.add(backward=1)
        if settings.monitoring.ENABLE_METRICS:
            get_model_evaluations().labels(kind="backward", algorithm=self.label).inc()

    def parameter_list(self) -> List[Tensor]:
        return list(self.params.values())

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def state_arrays(self) -> Dict[str, np.ndarray]:
        return {name: p.numpy() for name, p in self.params.items()}
