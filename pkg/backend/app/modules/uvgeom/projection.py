"""
Rendering and UV unwrapping.

`render` shades a mesh carrying a ReflectanceQuad into an image;
`unwrap` runs the mapping backwards, sampling an image into UV space and
marking which texels the camera actually sees.
"""

from typing import Sequence, Tuple

import numpy as np
from scipy import ndimage

from app.core.exceptions import ResolutionError, ShapeError, ViewportError
from app.core.logging import get_logger
from app.modules.inpaint import Observation, VisibilityMask
from app.modules.synthdata import ChannelLayout, LightSpec, ReflectanceQuad, blinn_phong
from app.modules.uvgeom.raster import Fragments, rasterize
from app.modules.uvgeom.schemas import Camera, Mesh

logger = get_logger(__name__)

CLEAR_COLOR = (0.0, 0.0, 0.0)
DEPTH_TOLERANCE_PX = 3.0


def front_facing(mesh: Mesh, camera: Camera) -> np.ndarray:
    """Faces whose outward normal points towards the viewer."""
    return camera.to_camera_space(mesh.face_normals())[:, 2] > 0.0


def rasterize_view(mesh: Mesh, camera: Camera, width: int, height: int) -> Fragments:
    xy, depth = camera.project(mesh.vertices)
    return rasterize(xy, depth, mesh.faces, width, height, keep=front_facing(mesh, camera))


def rasterize_uv(mesh: Mesh, R: int) -> Fragments:
    """Coverage of the R x R texel grid by the mesh's UV triangles."""
    return rasterize(mesh.uvs * R, np.zeros(mesh.num_vertices), mesh.faces, R, R)


def sample_uv(maps: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Bilinear lookup of (C, R, R) maps at (P, 2) UV points; returns (C, P)."""
    R = maps.shape[-1]
    coords = np.stack([uv[:, 1] * R - 0.5, uv[:, 0] * R - 0.5])
    return np.stack([ndimage.map_coordinates(c, coords, order=1, mode="nearest") for c in maps])


def sample_image(image: np.ndarray, xy: np.ndarray) -> np.ndarray:
    """Bilinear lookup of an (H, W, 3) image at (P, 2) pixel coordinates; returns (3, P)."""
    coords = np.stack([xy[:, 1] - 0.5, xy[:, 0] - 0.5])
    return np.stack(
        [ndimage.map_coordinates(image[..., c], coords, order=1, mode="nearest") for c in range(image.shape[-1])]
    )


def tangent_frames(mesh: Mesh) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Per-face orthonormal (tangent, bitangent, normal).

    The tangent follows +u and the bitangent follows -v, so a normal map
    value (0, 0, 1) is the geometric normal and a flat frontal quad maps
    map-space normals to camera space unchanged.
    """
    tri = mesh.vertices[mesh.faces]
    uv = mesh.uvs[mesh.faces]
    e1, e2 = tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]
    d1, d2 = uv[:, 1] - uv[:, 0], uv[:, 2] - uv[:, 0]
    det = d1[:, 0] * d2[:, 1] - d2[:, 0] * d1[:, 1]
    det = np.where(np.abs(det) > 1e-15, det, 1e-15)
    dp_du = (e1 * d2[:, 1:2] - e2 * d1[:, 1:2]) / det[:, None]
    dp_dv = (e2 * d1[:, 0:1] - e1 * d2[:, 0:1]) / det[:, None]

    normal = mesh.face_normals()
    tangent = dp_du - np.einsum("ij,ij->i", dp_du, normal)[:, None] * normal
    tangent /= np.maximum(np.linalg.norm(tangent, axis=1, keepdims=True), 1e-12)
    bitangent = -dp_dv
    bitangent = bitangent - np.einsum("ij,ij->i", bitangent, normal)[:, None] * normal
    bitangent = bitangent - np.einsum("ij,ij->i", bitangent, tangent)[:, None] * tangent
    bitangent /= np.maximum(np.linalg.norm(bitangent, axis=1, keepdims=True), 1e-12)
    return tangent, bitangent, normal


def render(
    mesh: Mesh,
    camera: Camera,
    quad: ReflectanceQuad,
    light: LightSpec,
    width: int,
    height: int,
    clear_color: Sequence[float] = CLEAR_COLOR,
) -> np.ndarray:
    """
    Rasterize and shade the mesh; returns an (H, W, 3) image in [0, 1].

    The light direction is given in camera space and the viewer looks down
    -z, so the view vector is (0, 0, 1).

    Raises:
        ViewportError: If width or height is not positive
    """
    if width <= 0 or height <= 0:
        raise ViewportError("viewport must have positive size", details={"width": width, "height": height})
    image = np.empty((height, width, 3))
    image[:] = np.asarray(clear_color, dtype=np.float64)

    frags = rasterize_view(mesh, camera, width, height)
    rows, cols = np.nonzero(frags.covered)
    if rows.size == 0:
        return image

    uv = frags.interpolate(mesh.uvs, mesh.faces)
    A_d = sample_uv(quad.A_d, uv)
    A_s = sample_uv(quad.A_s, uv)
    n_map = sample_uv(quad.N, uv)
    n_map /= np.maximum(np.linalg.norm(n_map, axis=0, keepdims=True), 1e-12)

    tangent, bitangent, normal = tangent_frames(mesh)
    f = frags.face[rows, cols]
    world = tangent[f] * n_map[0][:, None] + bitangent[f] * n_map[1][:, None] + normal[f] * n_map[2][:, None]
    n_cam = camera.to_camera_space(world).T
    n_cam /= np.maximum(np.linalg.norm(n_cam, axis=0, keepdims=True), 1e-12)

    image[rows, cols] = blinn_phong(A_d, A_s, n_cam, light).T
    return image


def unwrap_texture(
    image: np.ndarray,
    mesh: Mesh,
    camera: Camera,
    R: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sample `image` into an R x R texture without erosion.

    A texel is observed when its surface point lies on a front-facing
    triangle, projects inside the image and passes the depth test against
    the image z-buffer.

    Returns:
        (3, R, R) texture in [0, 1] (zero where unobserved) and the raw
        boolean visibility mask
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeError("image must be (H, W, 3)", details={"shape": image.shape})
    if R <= 0:
        raise ResolutionError("texture resolution must be positive", details={"R": R})
    height, width = image.shape[:2]

    uv_frags = rasterize_uv(mesh, R)
    rows, cols = np.nonzero(uv_frags.covered)
    points = uv_frags.interpolate(mesh.vertices, mesh.faces)
    xy, depth = camera.project(points)

    view = rasterize_view(mesh, camera, width, height)
    facing = front_facing(mesh, camera)[uv_frags.face[rows, cols]]
    inside = (xy[:, 0] >= 0.0) & (xy[:, 0] < width) & (xy[:, 1] >= 0.0) & (xy[:, 1] < height)
    pr = np.clip(np.floor(xy[:, 1]).astype(np.int64), 0, height - 1)
    pc = np.clip(np.floor(xy[:, 0]).astype(np.int64), 0, width - 1)
    unoccluded = depth >= view.depth[pr, pc] - DEPTH_TOLERANCE_PX / camera.scale
    visible = facing & inside & unoccluded

    raw = np.zeros((R, R), dtype=bool)
    raw[rows[visible], cols[visible]] = True
    texture = np.zeros((3, R, R))
    if visible.any():
        texture[:, rows[visible], cols[visible]] = np.clip(sample_image(image, xy[visible]), 0.0, 1.0)
    return texture, raw


def erode_mask(raw: np.ndarray) -> np.ndarray:
    """One-texel erosion with a 3x3 structuring element; texels off the grid count as unseen."""
    return ndimage.binary_erosion(raw, structure=np.ones((3, 3), dtype=bool), border_value=0)


def unwrap(
    image: np.ndarray,
    mesh: Mesh,
    camera: Camera,
    R: int,
    layout: ChannelLayout = ChannelLayout(),
) -> Observation:
    """
    Partial UV texture and eroded visibility mask of `image` seen through
    (mesh, camera). An empty projection yields an all-zero mask and a
    warning.
    """
    texture, raw = unwrap_texture(image, mesh, camera, R)
    mask = erode_mask(raw)
    if not raw.any():
        logger.warning(
            "Mesh does not project into the image; visibility mask is empty",
            extra={"tags": ["unwrap"], "image": list(np.shape(image)[:2])},
        )
    texture = np.where(mask[None], texture, 0.0)
    return Observation.from_texture(texture, VisibilityMask(mask.astype(np.uint8)), layout)
