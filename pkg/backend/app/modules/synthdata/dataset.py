"""
Dataset Module

Builds and reads the synthetic training set. Each item is a
[T, A_d, A_s, N] stack in the [-1, 1] working range, stored as float32 in
an NDT1 bundle together with the light it was shaded under.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import ValidationError
from tqdm import tqdm

from app.core.exceptions import ContainerFormatError, DatasetError
from app.core.logging import get_logger, log_duration
from app.core.settings import settings
from app.modules.ndtensor.container import load_bundle, save_bundle
from app.modules.ndtensor.random import make_rng
from app.modules.synthdata.generator import gen_reflectance
from app.modules.synthdata.schemas import ChannelLayout, DatasetHeader, LightSpec, ReflectanceQuad
from app.modules.synthdata.shading import histogram_match, shade_uv

logger = get_logger(__name__)

STORAGE_DTYPE = np.float32


def item_seed(seed: int, index: int) -> int:
    """Per-item material seed derived from the dataset seed."""
    return int(np.random.SeedSequence(int(seed), spawn_key=(int(index),)).generate_state(1)[0])


def canonical_light() -> LightSpec:
    """The single light used when relighting augmentation is disabled."""
    return LightSpec.towards((0.3, 0.3, 1.0), diffuse_intensity=0.9, ambient=0.15, specular_intensity=0.4, shininess=24.0)


def random_light(rng: np.random.Generator) -> LightSpec:
    """A light from the upper hemisphere with randomised intensities."""
    z = rng.uniform(0.3, 1.0)
    phi = rng.uniform(0.0, 2.0 * np.pi)
    r = np.sqrt(1.0 - z * z)
    return LightSpec.towards(
        (r * np.cos(phi), r * np.sin(phi), z),
        diffuse_intensity=float(rng.uniform(0.6, 1.2)),
        ambient=float(rng.uniform(0.05, 0.3)),
        specular_intensity=float(rng.uniform(0.0, 0.8)),
        shininess=float(rng.uniform(8.0, 64.0)),
    )


@dataclass
class Dataset:
    header: DatasetHeader
    stacks: np.ndarray
    lights: List[LightSpec]

    def __len__(self) -> int:
        return int(self.stacks.shape[0])

    def quad(self, index: int) -> ReflectanceQuad:
        return ReflectanceQuad.from_stack(self.stacks[index], self.header.layout)


def generate_item(
    seed: int,
    index: int,
    R: int,
    relight: bool,
    layout: ChannelLayout,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, LightSpec, np.random.Generator]:
    """Reflectance maps, light and the item's stream for later decisions."""
    A_d, A_s, N = gen_reflectance(item_seed(seed, index), R, specular_channels=layout.specular)
    rng = make_rng(seed, f"item-{index}")
    light = random_light(rng) if relight else canonical_light()
    return A_d, A_s, N, light, rng


def make_dataset(
    count: int,
    R: int,
    seed: int,
    path: Path,
    relight: bool = True,
    histogram_match_prob: float = 0.3,
    layout: ChannelLayout = ChannelLayout(),
    workers: int = 1,
) -> Path:
    """
    Generate `count` items and write them to `path`.

    Reflectance generation runs on `workers` threads; histogram matching
    and shading run in item order, so the file is identical for any
    worker count.

    Raises:
        DatasetError: If count < 1 or the file cannot be written
    """
    if count < 1:
        raise DatasetError("count must be at least 1", details={"count": count})

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        items = list(pool.map(lambda i: generate_item(seed, i, R, relight, layout), range(count)))

    stacks = np.empty((count, layout.total, R, R), dtype=STORAGE_DTYPE)
    lights = np.empty((count, 7), dtype=np.float64)
    matched = 0
    albedos: List[np.ndarray] = []
    with log_duration(logger, "make_dataset", count=count, resolution=R):
        for i, (A_d, A_s, N, light, rng) in enumerate(
            tqdm(items, desc="gen-data", disable=not settings.logging.PROGRESS_BARS, leave=False)
        ):
            if i > 0 and rng.uniform() < histogram_match_prob:
                A_d = histogram_match(A_d, albedos[int(rng.integers(0, i))])
                matched += 1
            albedos.append(A_d)
            T = shade_uv(A_d, A_s, N, light)
            stacks[i] = ReflectanceQuad(T=T, A_d=A_d, A_s=A_s, N=N).to_stack()
            lights[i] = light.as_array()

    header = DatasetHeader(
        count=count,
        resolution=R,
        channel_split=layout.split,
        seed=seed,
        relight=relight,
        histogram_match_prob=histogram_match_prob,
    )
    tensors = {f"item{i:06d}": stacks[i] for i in range(count)}
    tensors["lights"] = lights
    try:
        save_bundle(path, header.model_dump(), tensors)
    except OSError as e:
        raise DatasetError(f"Cannot write dataset {path}", details=str(e)) from e
    logger.info(
        "Dataset written",
        extra={"path": str(path), "count": count, "histogram_matched": matched, "tags": ["data"]},
    )
    return Path(path)


def load_dataset(path: Path, limit: Optional[int] = None) -> Dataset:
    """
    Raises:
        DatasetError: If the file is missing, malformed or empty
    """
    try:
        raw, tensors = load_bundle(path)
    except ContainerFormatError as e:
        raise DatasetError(f"Cannot read dataset {path}", details=e.message) from e
    raw.pop("names", None)
    try:
        header = DatasetHeader(**raw)
    except ValidationError as e:
        raise DatasetError("Invalid dataset header", details=str(e)) from e

    keys = [f"item{i:06d}" for i in range(header.count)]
    missing = [k for k in keys if k not in tensors]
    if missing or "lights" not in tensors:
        raise DatasetError("Dataset records are incomplete", details={"missing": missing[:5]})
    if limit is not None:
        keys = keys[:limit]
    stacks = np.stack([tensors[k] for k in keys])
    expected = (header.layout.total, header.resolution, header.resolution)
    if stacks.shape[1:] != expected:
        raise DatasetError("Record shape does not match header", details={"expected": expected})
    lights = [LightSpec.from_array(v) for v in tensors["lights"][: len(keys)]]
    return Dataset(header=header, stacks=stacks, lights=lights)
