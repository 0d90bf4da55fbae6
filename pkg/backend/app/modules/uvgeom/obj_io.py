"""
Wavefront OBJ subset: `v`, `vt` and triangular `f` records with v/vt
indices. One UV per vertex, so a face corner's vt index must equal its v
index after reading; writing always emits matching indices.
"""

from pathlib import Path
from typing import List, Union

import numpy as np

from app.core.exceptions import ShapeError
from app.modules.uvgeom.schemas import Mesh


def write_obj(path: Union[str, Path], mesh: Mesh) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines: List[str] = [f"v {x:.8f} {y:.8f} {z:.8f}" for x, y, z in mesh.vertices]
    lines += [f"vt {u:.8f} {1.0 - v:.8f}" for u, v in mesh.uvs]
    lines += [f"f {a + 1}/{a + 1} {b + 1}/{b + 1} {c + 1}/{c + 1}" for a, b, c in mesh.faces]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_obj(path: Union[str, Path]) -> Mesh:
    """
    Raises:
        ShapeError: On unsupported records, non-triangular faces or
            corners whose vt index differs from the v index
    """
    vertices, uvs, faces = [], [], []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        tag, fields = parts[0], parts[1:]
        if tag == "v":
            vertices.append([float(x) for x in fields[:3]])
        elif tag == "vt":
            u, v = float(fields[0]), float(fields[1])
            # OBJ stores v bottom-up; UV rows run top-down.
            uvs.append([u, 1.0 - v])
        elif tag == "f":
            if len(fields) != 3:
                raise ShapeError(f"{path}:{lineno}: only triangles are supported")
            corner = []
            for item in fields:
                refs = item.split("/")
                vi = int(refs[0]) - 1
                if len(refs) > 1 and refs[1] and int(refs[1]) - 1 != vi:
                    raise ShapeError(f"{path}:{lineno}: vt index must match v index")
                corner.append(vi)
            faces.append(corner)
        elif tag in ("o", "g", "s", "mtllib", "usemtl", "vn"):
            continue
        else:
            raise ShapeError(f"{path}:{lineno}: unsupported record '{tag}'")
    return Mesh(
        vertices=np.asarray(vertices, dtype=np.float64).reshape(-1, 3),
        faces=np.asarray(faces, dtype=np.int64).reshape(-1, 3),
        uvs=np.asarray(uvs, dtype=np.float64).reshape(-1, 2),
    )
