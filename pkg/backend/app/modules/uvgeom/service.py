"""
Reconstruction Service

Photo to completed reflectance quad: landmark fit, mesh instantiation, UV
unwrap and diffusion inpainting, with optional artifact export and
relighting of the result.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from app.core.logging import get_logger, log_duration
from app.core.settings import settings
from app.modules.diffusion import Checkpoint
from app.modules.inpaint import InpaintConfig, InpaintResult, Observation, inpaint
from app.modules.synthdata import ChannelLayout, LightSpec, ReflectanceQuad
from app.modules.uvgeom.fitting import fit_morphable
from app.modules.uvgeom.morphable import MorphableModel, instantiate
from app.modules.uvgeom.obj_io import write_obj
from app.modules.uvgeom.projection import render, unwrap
from app.modules.uvgeom.schemas import FitResult, Mesh
from app.utils.images import save_png

logger = get_logger(__name__)


def layout_of(checkpoint: Checkpoint) -> ChannelLayout:
    """Channel layout a checkpoint was trained on."""
    split = checkpoint.header.channel_split
    layout = ChannelLayout(specular=split[2] if split else checkpoint.header.model.in_channels - 9)
    checkpoint.require_channels(layout.split)
    return layout


@dataclass
class Reconstruction:
    """Everything produced on the way from photo to quad."""

    quad: ReflectanceQuad
    fit: FitResult
    mesh: Mesh
    observation: Observation
    result: InpaintResult
    relit: List[np.ndarray] = field(default_factory=list)
    artifacts: Dict[str, Path] = field(default_factory=dict)


class ReconstructionService:
    """Runs the reconstruction pipeline against one checkpoint and morphable model."""

    def __init__(
        self,
        model: MorphableModel,
        checkpoint: Checkpoint,
        resolution: Optional[int] = None,
        ridge: float = 1e-4,
    ):
        self.model = model
        self.checkpoint = checkpoint
        self.resolution = resolution or settings.data.RESOLUTION
        self.ridge = ridge
        self.layout = layout_of(checkpoint)
        self.schedule = checkpoint.schedule()

    def reconstruct(
        self,
        image: np.ndarray,
        landmarks2d: Sequence[Sequence[float]],
        cfg: InpaintConfig,
        output_dir: Optional[Path] = None,
        lights: Sequence[LightSpec] = (),
    ) -> Reconstruction:
        """
        Args:
            image: (H, W, 3) photo in [0, 1]
            landmarks2d: Image positions of the model's landmarks
            cfg: Sampler choice and seed
            output_dir: When set, every intermediate artifact is written there
            lights: Novel lights to render the completed quad under
        """
        with log_duration(logger, "reconstruct", algorithm=cfg.algorithm):
            fit = fit_morphable(landmarks2d, self.model, ridge=self.ridge)
            p_s, p_e = fit.coefficients()
            mesh = instantiate(self.model, p_s, p_e)
            obs = unwrap(image, mesh, fit.camera, self.resolution, self.layout)
            denoiser = self.checkpoint.to_model(label=cfg.algorithm)
            result = inpaint(denoiser, obs, self.schedule, cfg)

            height, width = np.shape(image)[:2]
            relit = [render(mesh, fit.camera, result.quad, light, width, height) for light in lights]

        recon = Reconstruction(
            quad=result.quad,
            fit=fit,
            mesh=mesh,
            observation=obs,
            result=result,
            relit=relit,
        )
        if output_dir is not None:
            recon.artifacts = self.export(recon, Path(output_dir))
        logger.info(
            "Reconstruction finished",
            extra={
                "algorithm": cfg.algorithm,
                "fit_residual": fit.residual,
                "mask_fraction": obs.mask.fraction,
                "tags": ["reconstruct"],
            },
        )
        return recon

    def export(self, recon: Reconstruction, output_dir: Path) -> Dict[str, Path]:
        """Write maps, mask, partial texture, relit renders and the fitted mesh."""
        output_dir.mkdir(parents=True, exist_ok=True)
        written: Dict[str, Path] = {}
        for name, values in recon.quad.encoded_maps().items():
            written[name] = save_png(output_dir / f"{name}.png", values)
        written["mask"] = save_png(output_dir / "mask.png", recon.observation.mask.grid.astype(np.float64))
        partial = 0.5 * (recon.observation.x0_known[:3] + 1.0) * recon.observation.mask.grid
        written["partial"] = save_png(output_dir / "partial_texture.png", partial)
        for i, img in enumerate(recon.relit):
            written[f"relit_{i}"] = save_png(output_dir / f"relit_{i:02d}.png", img)
        written["mesh"] = write_obj(output_dir / "mesh.obj", recon.mesh)
        logger.debug("Artifacts written", extra={"count": len(written), "path": str(output_dir)})
        return written


def reconstruct(
    image: np.ndarray,
    landmarks2d: Sequence[Sequence[float]],
    model: MorphableModel,
    checkpoint: Checkpoint,
    cfg: InpaintConfig,
    resolution: Optional[int] = None,
    output_dir: Optional[Path] = None,
    lights: Sequence[LightSpec] = (),
) -> Reconstruction:
    """Single-call form of ReconstructionService.reconstruct."""
    service = ReconstructionService(model, checkpoint, resolution=resolution)
    return service.reconstruct(image, landmarks2d, cfg, output_dir=output_dir, lights=lights)
