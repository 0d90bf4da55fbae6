"""
Geometry Schemas

Mesh with per-vertex UVs, weak-perspective camera and morphable-model fit
results.

Image convention: pixel (row, col) has its centre at (x, y) = (col + 0.5,
row + 0.5). The camera maps a point p to x = s * (R p)_x + t_x and
y = -s * (R p)_y + t_y, so world +y points up the image. Larger camera-space
z is nearer the viewer.
"""

from dataclasses import dataclass
from typing import Any, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.core.exceptions import ShapeError

_FLIP = np.array([1.0, -1.0])


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangle mesh; one UV per vertex, faces wound counter-clockwise outward."""

    vertices: np.ndarray
    faces: np.ndarray
    uvs: np.ndarray

    def __post_init__(self) -> None:
        vertices = np.asarray(self.vertices, dtype=np.float64)
        faces = np.asarray(self.faces, dtype=np.int64)
        uvs = np.asarray(self.uvs, dtype=np.float64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ShapeError("vertices must be (n, 3)", details={"shape": vertices.shape})
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ShapeError("faces must be (m, 3)", details={"shape": faces.shape})
        if uvs.shape != (vertices.shape[0], 2):
            raise ShapeError("need one UV per vertex", details={"uvs": uvs.shape})
        if faces.size and (faces.min() < 0 or faces.max() >= vertices.shape[0]):
            raise ShapeError("face index out of range")
        if np.any(uvs < 0.0) or np.any(uvs > 1.0):
            raise ValueError("UVs must lie in [0, 1]")
        tri = uvs[faces]
        area = 0.5 * np.abs(
            (tri[:, 1, 0] - tri[:, 0, 0]) * (tri[:, 2, 1] - tri[:, 0, 1])
            - (tri[:, 2, 0] - tri[:, 0, 0]) * (tri[:, 1, 1] - tri[:, 0, 1])
        )
        if np.any(area <= 0.0):
            raise ValueError("UV triangles must have non-zero area")
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", faces)
        object.__setattr__(self, "uvs", uvs)

    @property
    def num_vertices(self) -> int:
        return int(self.vertices.shape[0])

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        return Mesh(vertices=vertices, faces=self.faces, uvs=self.uvs)

    def face_normals(self) -> np.ndarray:
        """Unit outward normals, zero for degenerate faces."""
        tri = self.vertices[self.faces]
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        return np.where(norm > 1e-12, n / np.maximum(norm, 1e-12), 0.0)


class Camera(BaseModel):
    """Weak-perspective camera: scale, rotation and in-plane translation."""

    scale: float = Field(gt=0.0)
    rotation: Any = Field(default_factory=lambda: np.eye(3))
    translation: Tuple[float, float] = (0.0, 0.0)

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("rotation")
    @classmethod
    def validate_rotation(cls, v: Any) -> np.ndarray:
        r = np.asarray(v, dtype=np.float64)
        if r.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-6):
            raise ValueError("rotation must be orthonormal")
        if np.linalg.det(r) <= 0.0:
            raise ValueError("rotation must have determinant +1")
        return r

    @classmethod
    def from_yaw(cls, yaw_degrees: float, scale: float, translation: Tuple[float, float]) -> "Camera":
        """Camera turned by `yaw_degrees` about the world up axis."""
        a = np.deg2rad(yaw_degrees)
        c, s = np.cos(a), np.sin(a)
        rotation = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        return cls(scale=scale, rotation=rotation, translation=translation)

    def to_camera_space(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T

    def project(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Image coordinates (n, 2) and depth (n,) of world points."""
        q = self.to_camera_space(points)
        xy = self.scale * q[:, :2] * _FLIP + np.asarray(self.translation)
        return xy, q[:, 2]

    def describe(self) -> dict:
        return {
            "scale": self.scale,
            "rotation": self.rotation.tolist(),
            "translation": list(self.translation),
        }


class FitResult(BaseModel):
    """Outcome of landmark fitting."""

    p_s: List[float]
    p_e: List[float]
    camera: Camera
    residual: float = Field(ge=0.0)
    iterations: int = Field(default=0, ge=0)
    history: List[float] = Field(default_factory=list)
    converged: bool = False
    objective: Optional[float] = None

    def coefficients(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.p_s), np.asarray(self.p_e)
