"""
Landmark Fitting

Alternating least squares for a weak-perspective camera and morphable-model
coefficients:

1. camera step: scaled orthographic Procrustes between the current 3-D
   landmarks and the 2-D targets
2. shape step: ridge-regularised linear solve for (p_s, p_e) with the
   camera held fixed

The shape step is an exact minimiser of sum ||x_i - proj(X_i)||^2 +
ridge * ||p||^2 and a camera is only replaced when it lowers that sum, so
the recorded objective history never increases.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import orthogonal_procrustes, solve

from app.core.exceptions import DegenerateFitError, ShapeError
from app.core.logging import get_logger
from app.modules.uvgeom.morphable import MorphableModel
from app.modules.uvgeom.schemas import Camera, FitResult

logger = get_logger(__name__)

MIN_LANDMARKS = 6
MAX_ITERATIONS = 50
TOLERANCE = 1e-6
_Pose = Tuple[float, np.ndarray, np.ndarray]


def _camera_step(X: np.ndarray, L: np.ndarray) -> _Pose:
    """Scale, 2x3 image-space projection rows and translation best mapping X onto L."""
    x_mean, l_mean = X.mean(axis=0), L.mean(axis=0)
    Xc, Lc = X - x_mean, L - l_mean
    sv = np.linalg.svd(Xc.T @ Lc, compute_uv=False)
    if sv[0] <= 0.0 or sv[1] <= 1e-9 * sv[0]:
        raise DegenerateFitError(
            "landmarks do not constrain a rotation",
            details={"singular_values": sv.tolist()},
        )
    padded = np.concatenate([Lc, np.zeros((Lc.shape[0], 1))], axis=1)
    omega, _ = orthogonal_procrustes(Xc, padded)
    proj = omega[:, :2].T
    rotated = Xc @ proj.T
    scale = float(np.sum(rotated * Lc) / np.sum(rotated * rotated))
    if scale <= 0.0:
        raise DegenerateFitError("fitted scale is not positive", details={"scale": scale})
    translation = l_mean - scale * (x_mean @ proj.T)
    return scale, proj, translation


def _to_camera(scale: float, proj: np.ndarray, translation: np.ndarray) -> Camera:
    r1 = proj[0]
    r2 = -proj[1]
    r2 = r2 - (r2 @ r1) * r1
    r1, r2 = r1 / np.linalg.norm(r1), r2 / np.linalg.norm(r2)
    rotation = np.stack([r1, r2, np.cross(r1, r2)])
    return Camera(scale=scale, rotation=rotation, translation=(float(translation[0]), float(translation[1])))


def _shape_step(
    model: MorphableModel,
    L: np.ndarray,
    scale: float,
    proj: np.ndarray,
    translation: np.ndarray,
    ridge: float,
) -> np.ndarray:
    rows = model.landmark_rows()
    basis = model.basis[rows]
    mean = model.mean[model.landmark_indices]
    A = scale * np.einsum("ad,kdj->kaj", proj, basis).reshape(-1, basis.shape[-1])
    b = (L - translation - scale * mean @ proj.T).reshape(-1)
    lhs = A.T @ A + ridge * np.eye(A.shape[1])
    return solve(lhs, A.T @ b, assume_a="pos")


def _landmarks(model: MorphableModel, p: np.ndarray) -> np.ndarray:
    offset = (model.basis[model.landmark_rows()] @ p)
    return model.mean[model.landmark_indices] + offset


def _data_term(pose: _Pose, X: np.ndarray, L: np.ndarray) -> float:
    scale, proj, translation = pose
    return float(np.sum((scale * X @ proj.T + translation - L) ** 2))


def fit_morphable(
    landmarks2d: Sequence[Sequence[float]],
    model: MorphableModel,
    ridge: float = 1e-4,
    max_iterations: int = MAX_ITERATIONS,
) -> FitResult:
    """
    Fit coefficients and camera to 2-D landmarks.

    Args:
        landmarks2d: (k, 2) image positions, ordered like model.landmark_indices
        model: Morphable model to fit
        ridge: Tikhonov weight on the coefficients, >= 0
        max_iterations: Upper bound on alternations, >= 1

    Raises:
        ShapeError: On landmark count mismatch or fewer than six landmarks
        DegenerateFitError: If the landmark configuration cannot fix a camera
    """
    L = np.asarray(landmarks2d, dtype=np.float64)
    k = model.landmark_indices.size
    if L.ndim != 2 or L.shape[1] != 2:
        raise ShapeError("landmarks must be (k, 2)", details={"shape": L.shape})
    if L.shape[0] < MIN_LANDMARKS:
        raise ShapeError(f"need at least {MIN_LANDMARKS} landmarks", details={"count": L.shape[0]})
    if L.shape[0] != k:
        raise ShapeError("landmark count does not match the model", details={"given": L.shape[0], "model": k})
    if ridge < 0.0:
        raise ValueError("ridge must be non-negative")
    if max_iterations < 1:
        raise ValueError("max_iterations must be at least 1")

    p = np.zeros(model.k_s + model.k_e)
    pose: Optional[_Pose] = None
    history: List[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        X = _landmarks(model, p)
        candidate = _camera_step(X, L)
        # The scaled Procrustes solution is not always the joint optimum.
        if pose is None or _data_term(candidate, X, L) <= _data_term(pose, X, L):
            pose = candidate
        p = _shape_step(model, L, *pose, ridge)
        objective = _data_term(pose, _landmarks(model, p), L) + ridge * float(np.sum(p * p))
        history.append(objective)
        if len(history) > 1 and history[-2] - objective < TOLERANCE:
            converged = True
            break

    camera = _to_camera(*pose)
    projected, _ = camera.project(_landmarks(model, p))
    residual = float(np.mean(np.linalg.norm(projected - L, axis=1)))
    logger.info(
        "Morphable fit finished",
        extra={"iterations": iterations, "residual": residual, "converged": converged, "tags": ["fit"]},
    )
    return FitResult(
        p_s=p[: model.k_s].tolist(),
        p_e=p[model.k_s:].tolist(),
        camera=camera,
        residual=residual,
        iterations=iterations,
        history=history,
        converged=converged,
        objective=history[-1],
    )


def project_landmarks(model: MorphableModel, p_s: np.ndarray, p_e: np.ndarray, camera: Camera) -> np.ndarray:
    """2-D landmark positions of a known (p_s, p_e, camera)."""
    xy, _ = camera.project(_landmarks(model, np.concatenate([p_s, p_e])))
    return xy
