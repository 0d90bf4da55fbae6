"""
Benchmark Schemas

Frozen benchmark definition and the report it produces.
"""

import statistics
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.modules.harness.metrics import table_psnr
from app.modules.inpaint.schemas import ALGORITHMS

MAP_NAMES = ("T", "A_d", "A_s", "N")


class PoseSpec(BaseModel):
    """Camera pose relative to the image centre."""

    name: str
    yaw_degrees: float = Field(default=0.0, ge=-90.0, le=90.0)


def default_poses() -> List[PoseSpec]:
    return [
        PoseSpec(name="frontal", yaw_degrees=0.0),
        PoseSpec(name="left", yaw_degrees=-35.0),
        PoseSpec(name="right", yaw_degrees=35.0),
    ]


class BenchmarkSpec(BaseModel):
    """The frozen 20-seed comparison protocol."""

    seeds: List[int] = Field(default_factory=lambda: list(range(1000, 1020)))
    dataset_seed: int = Field(default=20240, ge=0)
    poses: List[PoseSpec] = Field(default_factory=default_poses)
    algorithms: List[str] = Field(default_factory=lambda: list(ALGORITHMS))
    resolution: int = Field(default=32, ge=11)
    image_size: int = Field(default=96, ge=16)
    repaint_n: int = Field(default=10, ge=1)
    mcg_scale: float = Field(default=1.0, ge=0.0)
    ddim_steps: Optional[int] = Field(default=None, ge=1)
    ddim_eta: float = Field(default=1.0, ge=0.0, le=1.0)
    model_seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)
    report_path: Path = Field(default=Path("reports/benchmark"))

    @field_validator("seeds")
    @classmethod
    def validate_seeds(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("at least one seed is required")
        if len(set(v)) != len(v):
            raise ValueError("seeds must be distinct")
        return v

    @field_validator("algorithms")
    @classmethod
    def validate_algorithms(cls, v: List[str]) -> List[str]:
        unknown = sorted(set(v) - set(ALGORITHMS))
        if unknown or not v:
            raise ValueError(f"unknown algorithms {unknown}; expected a subset of {list(ALGORITHMS)}")
        return v

    @field_validator("poses")
    @classmethod
    def validate_poses(cls, v: List[PoseSpec]) -> List[PoseSpec]:
        names = [p.name for p in v]
        if not v or len(set(names)) != len(names):
            raise ValueError("poses need distinct names")
        return v


class CaseRecord(BaseModel):
    """Per (seed, pose, algorithm) measurement."""

    # Identical inputs give an infinite PSNR; keep it through JSON.
    model_config = ConfigDict(ser_json_inf_nan="constants")

    seed: int
    pose: str
    algorithm: str
    observation_digest: str
    mask_fraction: float
    psnr: Dict[str, float]
    ssim: Dict[str, float]
    seconds: float
    forward_calls: int
    backward_calls: int


class MetricRow(BaseModel):
    algorithm: str
    map: str
    pose: str
    psnr_mean: float
    psnr_median: float
    ssim_mean: float
    ssim_median: float


class TimingRow(BaseModel):
    algorithm: str
    steps: int
    seconds_mean: float
    forward_calls: int
    backward_calls: int
    expected_forward: int
    expected_backward: int


class Report(BaseModel):
    """Aggregated benchmark output."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    spec: BenchmarkSpec
    checkpoint_step: int = 0
    T: int
    rows: List[MetricRow] = Field(default_factory=list)
    timings: List[TimingRow] = Field(default_factory=list)
    cases: List[CaseRecord] = Field(default_factory=list)

    @classmethod
    def aggregate(
        cls,
        spec: BenchmarkSpec,
        T: int,
        cases: List[CaseRecord],
        expected: Dict[str, Tuple[int, int, int]],
        checkpoint_step: int = 0,
    ) -> "Report":
        """
        Args:
            expected: algorithm -> (steps, forward, backward) from the
                sampler's analytic call-count formula
        """
        rows: List[MetricRow] = []
        timings: List[TimingRow] = []
        for algorithm in spec.algorithms:
            mine = [c for c in cases if c.algorithm == algorithm]
            for pose in [p.name for p in spec.poses] + ["all"]:
                subset = mine if pose == "all" else [c for c in mine if c.pose == pose]
                if not subset:
                    continue
                for name in MAP_NAMES:
                    p = [table_psnr(c.psnr[name]) for c in subset]
                    s = [c.ssim[name] for c in subset]
                    rows.append(
                        MetricRow(
                            algorithm=algorithm,
                            map=name,
                            pose=pose,
                            psnr_mean=statistics.fmean(p),
                            psnr_median=statistics.median(p),
                            ssim_mean=statistics.fmean(s),
                            ssim_median=statistics.median(s),
                        )
                    )
            if mine:
                steps, fwd, bwd = expected[algorithm]
                timings.append(
                    TimingRow(
                        algorithm=algorithm,
                        steps=steps,
                        seconds_mean=statistics.fmean(c.seconds for c in mine),
                        forward_calls=max(c.forward_calls for c in mine),
                        backward_calls=max(c.backward_calls for c in mine),
                        expected_forward=fwd,
                        expected_backward=bwd,
                    )
                )
        return cls(spec=spec, checkpoint_step=checkpoint_step, T=T, rows=rows, timings=timings, cases=cases)

    def metric(self, algorithm: str, map_name: str = "A_d", pose: str = "all", kind: str = "psnr_mean") -> float:
        for row in self.rows:
            if (row.algorithm, row.map, row.pose) == (algorithm, map_name, pose):
                return float(getattr(row, kind))
        raise KeyError((algorithm, map_name, pose))

    def to_text(self) -> str:
        lines = [
            f"Benchmark: {len(self.spec.seeds)} seeds, poses "
            f"{', '.join(p.name for p in self.spec.poses)}, T={self.T}, checkpoint step {self.checkpoint_step}",
            "",
            f"{'algorithm':<10} {'map':<4} {'pose':<8} {'PSNR mean':>10} {'PSNR med':>9} {'SSIM mean':>10} {'SSIM med':>9}",
        ]
        for r in self.rows:
            lines.append(
                f"{r.algorithm:<10} {r.map:<4} {r.pose:<8} {r.psnr_mean:>10.2f} {r.psnr_median:>9.2f}"
                f" {r.ssim_mean:>10.4f} {r.ssim_median:>9.4f}"
            )
        lines += [
            "",
            f"{'algorithm':<10} {'steps':>6} {'seconds':>9} {'forward':>8} {'backward':>9} {'expected':>12}",
        ]
        for t in self.timings:
            lines.append(
                f"{t.algorithm:<10} {t.steps:>6} {t.seconds_mean:>9.2f} {t.forward_calls:>8} {t.backward_calls:>9}"
                f" {t.expected_forward:>6}/{t.expected_backward:<5}"
            )
        return "\n".join(lines) + "\n"

    def write(self, path: Optional[Path] = None) -> Tuple[Path, Path]:
        """Write `<path>.txt` and `<path>.json`; returns both paths."""
        base = Path(path or self.spec.report_path)
        base.parent.mkdir(parents=True, exist_ok=True)
        text_path, json_path = base.with_suffix(".txt"), base.with_suffix(".json")
        text_path.write_text(self.to_text(), encoding="utf-8")
        json_path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        return text_path, json_path

    @classmethod
    def read(cls, path: Path) -> "Report":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))
