"""
Benchmark Service

Runs the frozen comparison: for every seed a held-out reflectance quad is
rendered on a deformed morphable mesh from each pose, fitted and unwrapped
once, then completed by every algorithm from that same Observation.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from app.core.logging import get_logger, log_duration
from app.modules.diffusion import Checkpoint
from app.modules.harness.metrics import psnr, ssim
from app.modules.harness.schemas import MAP_NAMES, BenchmarkSpec, CaseRecord, PoseSpec, Report
from app.modules.inpaint import InpaintConfig, Observation, inpaint
from app.modules.ndtensor.random import make_rng
from app.modules.synthdata import ChannelLayout, LightSpec, ReflectanceQuad, gen_reflectance, random_light, shade_uv
from app.modules.synthdata.dataset import item_seed
from app.modules.uvgeom import (
    Camera,
    MorphableModel,
    fit_morphable,
    instantiate,
    layout_of,
    project_landmarks,
    render,
    sample_coefficients,
    synthetic_model,
    unwrap,
)

logger = get_logger(__name__)

SHAPE_STD = 1.0
MASK_FRACTION_RANGE = (0.2, 0.8)


@dataclass
class BenchmarkCase:
    seed: int
    pose: str
    truth: ReflectanceQuad
    observation: Observation


def held_out_quad(spec: BenchmarkSpec, seed: int, layout: ChannelLayout) -> Tuple[ReflectanceQuad, LightSpec]:
    """Ground-truth quad and light for one benchmark seed."""
    A_d, A_s, N = gen_reflectance(item_seed(spec.dataset_seed, seed), spec.resolution, layout.specular)
    light = random_light(make_rng(seed, "benchmark-light"))
    return ReflectanceQuad(T=shade_uv(A_d, A_s, N, light), A_d=A_d, A_s=A_s, N=N), light


def pose_camera(spec: BenchmarkSpec, pose: PoseSpec) -> Camera:
    half = spec.image_size / 2.0
    return Camera.from_yaw(pose.yaw_degrees, scale=0.4 * spec.image_size, translation=(half, half))


def build_case(
    spec: BenchmarkSpec,
    model: MorphableModel,
    layout: ChannelLayout,
    seed: int,
    pose: PoseSpec,
) -> BenchmarkCase:
    """
    Render, fit and unwrap one (seed, pose) observation.

    A mask fraction outside `MASK_FRACTION_RANGE` is logged as a warning and
    the case is kept, so small image sizes still produce a full report.
    """
    truth, light = held_out_quad(spec, seed, layout)
    p_s, p_e = sample_coefficients(model, make_rng(seed, "benchmark-shape"), std=SHAPE_STD)
    mesh = instantiate(model, p_s, p_e)
    camera = pose_camera(spec, pose)
    image = render(mesh, camera, truth, light, spec.image_size, spec.image_size)

    fit = fit_morphable(project_landmarks(model, p_s, p_e, camera), model)
    fitted = instantiate(model, *fit.coefficients())
    obs = unwrap(image, fitted, fit.camera, spec.resolution, layout)
    lo, hi = MASK_FRACTION_RANGE
    if not lo <= obs.mask.fraction <= hi:
        logger.warning(
            "Pose mask fraction outside the benchmark range",
            extra={"seed": seed, "pose": pose.name, "mask_fraction": obs.mask.fraction},
        )
    return BenchmarkCase(seed=seed, pose=pose.name, truth=truth, observation=obs)


def sampler_config(spec: BenchmarkSpec, algorithm: str, seed: int) -> InpaintConfig:
    return InpaintConfig(
        algorithm=algorithm,
        steps=spec.ddim_steps if algorithm == "mcg_ddim" else None,
        repaint_n=spec.repaint_n,
        mcg_scale=spec.mcg_scale,
        ddim_eta=spec.ddim_eta,
        seed=seed,
    )


def score_quads(truth: ReflectanceQuad, estimate: ReflectanceQuad) -> Tuple[Dict[str, float], Dict[str, float]]:
    """PSNR and SSIM per map in the [0, 1] encoding."""
    a, b = truth.encoded_maps(), estimate.encoded_maps()
    return (
        {name: psnr(a[name], b[name]) for name in MAP_NAMES},
        {name: ssim(a[name], b[name]) for name in MAP_NAMES},
    )


class BenchmarkService:
    """Evaluates every algorithm against one checkpoint."""

    def __init__(self, spec: BenchmarkSpec, checkpoint: Checkpoint, model: Optional[MorphableModel] = None):
        self.spec = spec
        self.checkpoint = checkpoint
        self.layout = layout_of(checkpoint)
        self.schedule = checkpoint.schedule()
        self.model = model or synthetic_model(seed=spec.model_seed)

    def cases(self) -> List[BenchmarkCase]:
        return [
            build_case(self.spec, self.model, self.layout, seed, pose)
            for seed in self.spec.seeds
            for pose in self.spec.poses
        ]

    def evaluate(self, case: BenchmarkCase, algorithm: str) -> CaseRecord:
        cfg = sampler_config(self.spec, algorithm, case.seed)
        denoiser = self.checkpoint.to_model(label=algorithm)
        result = inpaint(denoiser, case.observation, self.schedule, cfg)
        psnrs, ssims = score_quads(case.truth, result.quad)
        return CaseRecord(
            seed=case.seed,
            pose=case.pose,
            algorithm=algorithm,
            observation_digest=case.observation.digest(),
            mask_fraction=case.observation.mask.fraction,
            psnr=psnrs,
            ssim=ssims,
            seconds=result.seconds,
            forward_calls=result.forward_calls,
            backward_calls=result.backward_calls,
        )

    def expected_calls(self) -> Dict[str, Tuple[int, int, int]]:
        T = self.schedule.T
        out = {}
        for algorithm in self.spec.algorithms:
            cfg = sampler_config(self.spec, algorithm, 0)
            calls = cfg.expected_calls(T)
            out[algorithm] = (cfg.resolved_steps(T), calls["forward"], calls["backward"])
        return out

    def run(self) -> Report:
        started = time.perf_counter()
        with log_duration(logger, "benchmark_cases"):
            cases = self.cases()
        jobs = [(case, algorithm) for case in cases for algorithm in self.spec.algorithms]
        logger.info(
            "Benchmark started",
            extra={"cases": len(cases), "jobs": len(jobs), "workers": self.spec.workers, "tags": ["benchmark"]},
        )
        with ThreadPoolExecutor(max_workers=self.spec.workers) as pool:
            records = list(pool.map(lambda job: self.evaluate(*job), jobs))

        report = Report.aggregate(
            self.spec,
            T=self.schedule.T,
            cases=records,
            expected=self.expected_calls(),
            checkpoint_step=self.checkpoint.step,
        )
        logger.info(
            "Benchmark finished",
            extra={"duration_ms": (time.perf_counter() - started) * 1000.0, "tags": ["benchmark"]},
        )
        return report


def run_benchmark(spec: BenchmarkSpec, checkpoint: Checkpoint, write: bool = True) -> Report:
    """
    Run the benchmark and, unless `write` is false, write the text and JSON
    report next to `spec.report_path`.

    Raises:
        CheckpointError: If the checkpoint was trained on another channel layout
    """
    report = BenchmarkService(spec, checkpoint).run()
    if write:
        text_path, json_path = report.write()
        logger.info("Report written", extra={"text": str(text_path), "json": str(json_path)})
    return report


def evaluate_maps(truth: ReflectanceQuad, estimate: ReflectanceQuad) -> Dict[str, Dict[str, float]]:
    """Per-map PSNR/SSIM table for a single estimate."""
    psnrs, ssims = score_quads(truth, estimate)
    return {name: {"psnr": psnrs[name], "ssim": ssims[name]} for name in MAP_NAMES}
