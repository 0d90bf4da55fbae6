"""
Synthetic Data Schemas

Pydantic records for lights, channel layouts and dataset headers, plus the
`ReflectanceQuad` container for one set of stacked UV maps.
"""

from dataclasses import dataclass
from typing import Dict, List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.exceptions import ShapeError

GENERATOR_VERSION = "blinn-phong-1"


def _unit(vector: np.ndarray, axis: int = 0) -> np.ndarray:
    norm = np.linalg.norm(vector, axis=axis, keepdims=True)
    return vector / np.maximum(norm, 1e-12)


class LightSpec(BaseModel):
    """Directional light plus ambient term with Blinn-Phong highlights."""

    direction: Tuple[float, float, float]
    diffuse_intensity: float = Field(default=1.0, ge=0.0, le=1.5)
    ambient: float = Field(default=0.0, ge=0.0, le=1.5)
    specular_intensity: float = Field(default=0.0, ge=0.0, le=1.5)
    shininess: float = Field(default=16.0, ge=1.0)

    model_config = ConfigDict(frozen=True)

    @field_validator("direction")
    @classmethod
    def validate_direction(cls, v: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if abs(float(np.linalg.norm(v)) - 1.0) > 1e-6:
            raise ValueError("light direction must be unit length")
        return tuple(float(c) for c in v)

    @classmethod
    def towards(cls, direction: Tuple[float, float, float], **kwargs: float) -> "LightSpec":
        """Build a light from any non-zero direction, normalising it."""
        d = np.asarray(direction, dtype=np.float64)
        return cls(direction=tuple(d / np.linalg.norm(d)), **kwargs)

    def as_array(self) -> np.ndarray:
        return np.array(
            [*self.direction, self.diffuse_intensity, self.ambient, self.specular_intensity, self.shininess],
            dtype=np.float64,
        )

    @classmethod
    def from_array(cls, values: np.ndarray) -> "LightSpec":
        v = np.asarray(values, dtype=np.float64)
        return cls.towards(
            tuple(v[:3]),
            diffuse_intensity=float(v[3]),
            ambient=float(v[4]),
            specular_intensity=float(v[5]),
            shininess=float(v[6]),
        )


class ChannelLayout(BaseModel):
    """Channel counts of the stacked maps in the fixed order [T, A_d, A_s, N]."""

    texture: Literal[3] = 3
    diffuse: Literal[3] = 3
    specular: int = Field(default=1)
    normal: Literal[3] = 3

    model_config = ConfigDict(frozen=True)

    @field_validator("specular")
    @classmethod
    def validate_specular(cls, v: int) -> int:
        if v not in (1, 3):
            raise ValueError("specular albedo has 1 or 3 channels")
        return v

    @property
    def split(self) -> List[int]:
        return [self.texture, self.diffuse, self.specular, self.normal]

    @property
    def total(self) -> int:
        return sum(self.split)

    def slices(self) -> Dict[str, slice]:
        """Channel slice of each map inside the stack."""
        out: Dict[str, slice] = {}
        start = 0
        for name, count in zip(("T", "A_d", "A_s", "N"), self.split):
            out[name] = slice(start, start + count)
            start += count
        return out


class DatasetHeader(BaseModel):
    """Index header written in front of the dataset records."""

    format: str = "reflectance-dataset"
    count: int = Field(ge=1)
    resolution: int = Field(ge=4)
    channel_split: List[int]
    generator_version: str = GENERATOR_VERSION
    seed: int
    relight: bool = True
    histogram_match_prob: float = Field(default=0.3, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def validate_split(self) -> "DatasetHeader":
        if len(self.channel_split) != 4:
            raise ValueError("channel_split lists four map widths")
        return self

    @property
    def layout(self) -> ChannelLayout:
        return ChannelLayout(specular=self.channel_split[2])


@dataclass(frozen=True, eq=False)
class ReflectanceQuad:
    """
    Stacked UV maps: shaded texture T, diffuse albedo A_d, specular albedo
    A_s and unit normals N, each (channels, R, R) in float64.

    T, A_d and A_s hold values in [0, 1]; N holds unit vectors with n_z > 0.
    """

    T: np.ndarray
    A_d: np.ndarray
    A_s: np.ndarray
    N: np.ndarray

    def __post_init__(self) -> None:
        shapes = {a.shape[1:] for a in (self.T, self.A_d, self.A_s, self.N)}
        if len(shapes) != 1:
            raise ShapeError("maps must share a resolution", details=[a.shape for a in self.maps().values()])
        if self.T.shape[0] != 3 or self.A_d.shape[0] != 3 or self.N.shape[0] != 3:
            raise ShapeError("T, A_d and N have three channels")
        if self.A_s.shape[0] not in (1, 3):
            raise ShapeError("A_s has one or three channels")

    @property
    def resolution(self) -> int:
        return int(self.T.shape[1])

    @property
    def layout(self) -> ChannelLayout:
        return ChannelLayout(specular=self.A_s.shape[0])

    def maps(self) -> Dict[str, np.ndarray]:
        return {"T": self.T, "A_d": self.A_d, "A_s": self.A_s, "N": self.N}

    def encoded_maps(self) -> Dict[str, np.ndarray]:
        """Maps in [0, 1]; normals use the 0.5 * (n + 1) encoding."""
        maps = dict(self.maps())
        maps["N"] = 0.5 * (self.N + 1.0)
        return maps

    def to_stack(self) -> np.ndarray:
        """(C, R, R) stack in the [-1, 1] working range."""
        encoded = self.encoded_maps()
        return np.concatenate([2.0 * encoded[k] - 1.0 for k in ("T", "A_d", "A_s", "N")], axis=0)

    @classmethod
    def from_stack(cls, stack: np.ndarray, layout: ChannelLayout = ChannelLayout()) -> "ReflectanceQuad":
        """
        Decode a working-range stack, clipping to [-1, 1] and renormalising
        normals onto the upper hemisphere.
        """
        stack = np.asarray(stack, dtype=np.float64)
        if stack.ndim != 3 or stack.shape[0] != layout.total:
            raise ShapeError(
                f"expected a ({layout.total}, R, R) stack",
                details={"shape": stack.shape},
            )
        s = layout.slices()
        unit = np.clip(stack, -1.0, 1.0)
        to01 = 0.5 * (unit + 1.0)
        normals = unit[s["N"]].copy()
        normals[2] = np.maximum(normals[2], 1e-3)
        return cls(T=to01[s["T"]], A_d=to01[s["A_d"]], A_s=to01[s["A_s"]], N=_unit(normals))
