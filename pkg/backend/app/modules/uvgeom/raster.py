"""
Z-buffered triangle rasterizer.

Triangles are scanned over their pixel bounding boxes with edge functions.
A pixel is covered when its centre has all barycentric weights >= -EDGE_EPS;
among covering triangles the one with the largest interpolated depth wins.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

EDGE_EPS = 1e-9


@dataclass
class Fragments:
    """Per-pixel winning face (-1 for background), barycentrics and depth."""

    face: np.ndarray
    bary: np.ndarray
    depth: np.ndarray

    @property
    def covered(self) -> np.ndarray:
        return self.face >= 0

    def interpolate(self, attributes: np.ndarray, faces: np.ndarray) -> np.ndarray:
        """
        Barycentric interpolation of per-vertex `attributes` (n, d) at the
        covered pixels; returns (P, d) in row-major pixel order.
        """
        rows, cols = np.nonzero(self.covered)
        corners = attributes[faces[self.face[rows, cols]]]
        return np.einsum("pk,pkd->pd", self.bary[rows, cols], corners)


def rasterize(
    points: np.ndarray,
    depth: np.ndarray,
    faces: np.ndarray,
    width: int,
    height: int,
    keep: Optional[np.ndarray] = None,
) -> Fragments:
    """
    Args:
        points: (n, 2) vertex positions in pixel coordinates (x, y)
        depth: (n,) vertex depth, larger is nearer
        faces: (m, 3) vertex indices
        width, height: Target size in pixels
        keep: Optional (m,) boolean face filter, e.g. front-facing only
    """
    face_buf = np.full((height, width), -1, dtype=np.int64)
    bary_buf = np.zeros((height, width, 3))
    z_buf = np.full((height, width), -np.inf)

    for f in np.flatnonzero(keep) if keep is not None else range(faces.shape[0]):
        i0, i1, i2 = faces[f]
        (x0, y0), (x1, y1), (x2, y2) = points[i0], points[i1], points[i2]
        area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if abs(area) < 1e-12:
            continue
        c_lo = max(int(np.floor(min(x0, x1, x2) - 0.5)), 0)
        c_hi = min(int(np.ceil(max(x0, x1, x2) - 0.5)), width - 1)
        r_lo = max(int(np.floor(min(y0, y1, y2) - 0.5)), 0)
        r_hi = min(int(np.ceil(max(y0, y1, y2) - 0.5)), height - 1)
        if c_lo > c_hi or r_lo > r_hi:
            continue
        ys, xs = np.mgrid[r_lo:r_hi + 1, c_lo:c_hi + 1]
        px, py = xs + 0.5, ys + 0.5
        w0 = ((x1 - px) * (y2 - py) - (x2 - px) * (y1 - py)) / area
        w1 = ((x2 - px) * (y0 - py) - (x0 - px) * (y2 - py)) / area
        w2 = 1.0 - w0 - w1
        inside = (w0 >= -EDGE_EPS) & (w1 >= -EDGE_EPS) & (w2 >= -EDGE_EPS)
        if not inside.any():
            continue
        z = w0 * depth[i0] + w1 * depth[i1] + w2 * depth[i2]
        win = inside & (z > z_buf[ys, xs])
        rr, cc = ys[win], xs[win]
        z_buf[rr, cc] = z[win]
        face_buf[rr, cc] = f
        bary_buf[rr, cc] = np.stack([w0[win], w1[win], w2[win]], axis=-1)

    return Fragments(face=face_buf, bary=bary_buf, depth=z_buf)
