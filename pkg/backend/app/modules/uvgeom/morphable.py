"""
Morphable Model

Linear shape model S(p_s, p_e) = m + U_s p_s + U_e p_e over a fixed-topology
mesh. The stock model is synthetic: an open ellipsoid (caps removed)
parameterised by longitude and latitude, so the UV layout is cylindrical
with a duplicated seam column at the back. Its bases are smooth random
polynomial deformations, orthogonalised against translation, rotation and
scaling of the mean shape and orthonormalised jointly.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import ShapeError
from app.modules.ndtensor.random import make_rng
from app.modules.uvgeom.schemas import Mesh

RADII = (0.8, 1.0, 0.7)
POLAR_RANGE = (np.deg2rad(15.0), np.deg2rad(165.0))


def _orient_outward(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    tri = vertices[faces]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    outward = np.einsum("ij,ij->i", n, tri.mean(axis=1)) >= 0.0
    return np.where(outward[:, None], faces, faces[:, [0, 2, 1]])


def ellipsoid_mesh(rows: int = 16, cols: int = 32, radii: Sequence[float] = RADII) -> Mesh:
    """
    Open ellipsoid with a longitude/latitude grid.

    u follows longitude (front at u = 0.5), v follows the polar angle from
    the top. The seam column is duplicated so every vertex owns one UV.
    """
    theta = np.linspace(*POLAR_RANGE, rows + 1)
    phi = np.linspace(-np.pi, np.pi, cols + 1)
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    rx, ry, rz = radii
    vertices = np.stack(
        [rx * np.sin(th) * np.sin(ph), ry * np.cos(th), rz * np.sin(th) * np.cos(ph)], axis=-1
    ).reshape(-1, 3)
    v_span = POLAR_RANGE[1] - POLAR_RANGE[0]
    uvs = np.stack([(ph + np.pi) / (2 * np.pi), (th - POLAR_RANGE[0]) / v_span], axis=-1).reshape(-1, 2)

    idx = np.arange((rows + 1) * (cols + 1)).reshape(rows + 1, cols + 1)
    a, b = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    c, d = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
    faces = np.concatenate([np.stack([a, c, b], 1), np.stack([b, c, d], 1)])
    return Mesh(vertices=vertices, faces=_orient_outward(vertices, faces), uvs=uvs)


def flat_quad_mesh(cells: int = 8) -> Mesh:
    """
    Square [-1, 1]^2 at z = 0 facing +z with u = (x + 1) / 2 and
    v = (1 - y) / 2, so a frontal camera maps UV rows onto image rows.
    """
    g = np.linspace(-1.0, 1.0, cells + 1)
    yy, xx = np.meshgrid(g[::-1], g, indexing="ij")
    vertices = np.stack([xx, yy, np.zeros_like(xx)], axis=-1).reshape(-1, 3)
    uvs = np.stack([(xx + 1.0) / 2.0, (1.0 - yy) / 2.0], axis=-1).reshape(-1, 2)
    idx = np.arange((cells + 1) ** 2).reshape(cells + 1, cells + 1)
    a, b = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    c, d = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
    faces = np.concatenate([np.stack([a, c, b], 1), np.stack([b, c, d], 1)])
    tri = vertices[faces]
    facing = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])[:, 2] > 0.0
    faces = np.where(facing[:, None], faces, faces[:, [0, 2, 1]])
    return Mesh(vertices=vertices, faces=faces, uvs=uvs)


@dataclass(frozen=True, eq=False)
class MorphableModel:
    """Mean shape, column-orthonormal bases and landmark vertex ids."""

    mean: np.ndarray
    shape_basis: np.ndarray
    expr_basis: np.ndarray
    landmark_indices: np.ndarray
    topology: Mesh

    def __post_init__(self) -> None:
        n = self.mean.shape[0]
        if self.mean.shape != (n, 3):
            raise ShapeError("mean must be (n, 3)")
        for name, basis in (("shape_basis", self.shape_basis), ("expr_basis", self.expr_basis)):
            if basis.ndim != 2 or basis.shape[0] != 3 * n or basis.shape[1] < 1:
                raise ShapeError(f"{name} must be (3n, k) with k >= 1", details={"shape": basis.shape})
            if not np.allclose(basis.T @ basis, np.eye(basis.shape[1]), atol=1e-8):
                raise ValueError(f"{name} columns must be orthonormal")
        if np.any(self.landmark_indices < 0) or np.any(self.landmark_indices >= n):
            raise ShapeError("landmark index out of range")
        if self.topology.num_vertices != n:
            raise ShapeError("topology does not match the mean shape")

    @property
    def k_s(self) -> int:
        return int(self.shape_basis.shape[1])

    @property
    def k_e(self) -> int:
        return int(self.expr_basis.shape[1])

    @property
    def basis(self) -> np.ndarray:
        return np.concatenate([self.shape_basis, self.expr_basis], axis=1)

    def landmark_rows(self) -> np.ndarray:
        """Rows of the flattened (3n,) layout belonging to the landmarks, shape (k, 3)."""
        return 3 * self.landmark_indices[:, None] + np.arange(3)[None, :]


def _monomials(points: np.ndarray, degree: int) -> np.ndarray:
    x, y, z = points.T
    terms = [
        x ** i * y ** j * z ** k
        for i in range(degree + 1)
        for j in range(degree + 1 - i)
        for k in range(degree + 1 - i - j)
    ]
    return np.stack(terms, axis=1)


def _similarity_generators(mean: np.ndarray) -> np.ndarray:
    """Flattened infinitesimal translations, rotations and scaling of `mean`."""
    n = mean.shape[0]
    gens = []
    for axis in range(3):
        t = np.zeros((n, 3))
        t[:, axis] = 1.0
        gens.append(t.ravel())
        e = np.zeros(3)
        e[axis] = 1.0
        gens.append(np.cross(e, mean).ravel())
    gens.append(mean.ravel())
    return np.stack(gens, axis=1)


def synthetic_model(
    seed: int = 0,
    k_s: int = 10,
    k_e: int = 5,
    landmarks: int = 40,
    rows: int = 16,
    cols: int = 32,
    degree: int = 3,
) -> MorphableModel:
    """
    Build the synthetic morphable model.

    Landmarks are drawn from the front half (z > 0.3 * depth radius), where
    frontal and moderate side views see them.
    """
    topology = ellipsoid_mesh(rows, cols)
    mean = topology.vertices
    rng = make_rng(seed, "morphable")

    features = _monomials(mean, degree)
    fields = np.stack(
        [(features @ rng.standard_normal((features.shape[1], 3))).ravel() for _ in range(k_s + k_e)],
        axis=1,
    )
    q_sim, _ = np.linalg.qr(_similarity_generators(mean))
    fields -= q_sim @ (q_sim.T @ fields)
    basis, _ = np.linalg.qr(fields)

    front = np.flatnonzero(mean[:, 2] > 0.3 * RADII[2])
    chosen = np.sort(rng.choice(front, size=min(landmarks, front.size), replace=False))
    return MorphableModel(
        mean=mean,
        shape_basis=np.ascontiguousarray(basis[:, :k_s]),
        expr_basis=np.ascontiguousarray(basis[:, k_s:]),
        landmark_indices=chosen,
        topology=topology,
    )


def _check_lengths(model: MorphableModel, p_s: np.ndarray, p_e: np.ndarray) -> None:
    if p_s.shape != (model.k_s,) or p_e.shape != (model.k_e,):
        raise ShapeError(
            "coefficient lengths do not match the bases",
            details={"p_s": p_s.shape, "p_e": p_e.shape, "k_s": model.k_s, "k_e": model.k_e},
        )


def instantiate(
    model: MorphableModel,
    p_s: Optional[Sequence[float]] = None,
    p_e: Optional[Sequence[float]] = None,
) -> Mesh:
    """Mesh for coefficients (p_s, p_e); missing coefficients are zero."""
    p_s = np.zeros(model.k_s) if p_s is None else np.asarray(p_s, dtype=np.float64)
    p_e = np.zeros(model.k_e) if p_e is None else np.asarray(p_e, dtype=np.float64)
    _check_lengths(model, p_s, p_e)
    offset = model.shape_basis @ p_s + model.expr_basis @ p_e
    return model.topology.with_vertices(model.mean + offset.reshape(-1, 3))


def landmark_points(model: MorphableModel, mesh: Mesh) -> np.ndarray:
    return mesh.vertices[model.landmark_indices]


def sample_coefficients(model: MorphableModel, rng: np.random.Generator, std: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    return std * rng.standard_normal(model.k_s), std * rng.standard_normal(model.k_e)
