"""Mesh and UV machinery: morphable fit, rendering, unwrapping and reconstruction."""

from app.modules.uvgeom.fitting import fit_morphable, project_landmarks
from app.modules.uvgeom.morphable import (
    MorphableModel,
    ellipsoid_mesh,
    flat_quad_mesh,
    instantiate,
    landmark_points,
    sample_coefficients,
    synthetic_model,
)
from app.modules.uvgeom.obj_io import read_obj, write_obj
from app.modules.uvgeom.projection import erode_mask, render, unwrap, unwrap_texture
from app.modules.uvgeom.raster import Fragments, rasterize
from app.modules.uvgeom.schemas import Camera, FitResult, Mesh
from app.modules.uvgeom.service import Reconstruction, ReconstructionService, layout_of, reconstruct

__all__ = [
    "Camera",
    "FitResult",
    "Fragments",
    "Mesh",
    "MorphableModel",
    "Reconstruction",
    "ReconstructionService",
    "ellipsoid_mesh",
    "erode_mask",
    "fit_morphable",
    "flat_quad_mesh",
    "instantiate",
    "landmark_points",
    "layout_of",
    "project_landmarks",
    "rasterize",
    "read_obj",
    "reconstruct",
    "render",
    "sample_coefficients",
    "synthetic_model",
    "unwrap",
    "unwrap_texture",
    "write_obj",
]
