"""Procedural reflectance quadruples and their shaded textures."""

from app.modules.synthdata.dataset import (
    Dataset,
    canonical_light,
    load_dataset,
    make_dataset,
    random_light,
)
from app.modules.synthdata.generator import gen_reflectance
from app.modules.synthdata.schemas import ChannelLayout, DatasetHeader, LightSpec, ReflectanceQuad
from app.modules.synthdata.shading import blinn_phong, histogram_match, shade_uv

__all__ = [
    "ChannelLayout",
    "Dataset",
    "DatasetHeader",
    "LightSpec",
    "ReflectanceQuad",
    "blinn_phong",
    "canonical_light",
    "gen_reflectance",
    "histogram_match",
    "load_dataset",
    "make_dataset",
    "random_light",
    "shade_uv",
]
