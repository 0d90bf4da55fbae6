"""
Benchmark Schema Tests

Validation of the benchmark definition and report aggregation.
"""

import math
from pathlib import Path
from typing import List

import pytest
from pydantic import ValidationError

from app.modules.harness.schemas import MAP_NAMES, BenchmarkSpec, CaseRecord, PoseSpec, Report


@pytest.fixture
def spec(tmp_path: Path) -> BenchmarkSpec:
    """Two-pose, two-algorithm benchmark writing under tmp_path."""
    return BenchmarkSpec(
        seeds=[1, 2],
        poses=[PoseSpec(name="frontal"), PoseSpec(name="left", yaw_degrees=-35.0)],
        algorithms=["score_sde", "repaint"],
        report_path=tmp_path / "reports" / "bench",
    )


def _record(seed: int, pose: str, algorithm: str, value: float) -> CaseRecord:
    return CaseRecord(
        seed=seed,
        pose=pose,
        algorithm=algorithm,
        observation_digest=f"{seed}-{pose}",
        mask_fraction=0.5,
        psnr={name: value for name in MAP_NAMES},
        ssim={name: value / 100.0 for name in MAP_NAMES},
        seconds=float(seed),
        forward_calls=100,
        backward_calls=0,
    )


@pytest.fixture
def records() -> List[CaseRecord]:
    """Eight records with distinct PSNRs; one is infinite."""
    out = []
    for algorithm, base in (("score_sde", 10.0), ("repaint", 20.0)):
        for seed in (1, 2):
            for pose in ("frontal", "left"):
                out.append(_record(seed, pose, algorithm, base + seed))
    out[0] = _record(1, "frontal", "score_sde", math.inf)
    return out


def test_defaults():
    """Test the default benchmark is the 20-seed, three-pose comparison."""
    spec = BenchmarkSpec()
    assert spec.seeds == list(range(1000, 1020))
    assert [p.name for p in spec.poses] == ["frontal", "left", "right"]
    assert spec.algorithms == ["score_sde", "repaint", "mcg", "mcg_ddim"]
    assert spec.workers == 1


@pytest.mark.parametrize(
    "overrides",
    [
        {"seeds": []},
        {"seeds": [1, 1]},
        {"algorithms": ["ddpm"]},
        {"algorithms": []},
        {"poses": [PoseSpec(name="a"), PoseSpec(name="a")]},
        {"resolution": 8},
        {"image_size": 8},
        {"ddim_eta": 1.5},
        {"repaint_n": 0},
    ],
)
def test_invalid_spec(overrides):
    """Test invalid benchmark definitions are rejected."""
    with pytest.raises(ValidationError):
        BenchmarkSpec(**overrides)


def test_pose_yaw_range():
    """Test yaw is limited to +-90 degrees."""
    with pytest.raises(ValidationError):
        PoseSpec(name="back", yaw_degrees=180.0)


def test_aggregate_rows(spec, records):
    """Test aggregation produces per-pose and overall rows with capped means."""
    report = Report.aggregate(spec, T=100, cases=records, expected={"score_sde": (100, 100, 0), "repaint": (100, 200, 0)})
    assert len(report.rows) == 2 * 3 * len(MAP_NAMES)
    # frontal score_sde: inf (capped at 99) and 12
    assert report.metric("score_sde", "A_d", "frontal") == pytest.approx((99.0 + 12.0) / 2.0)
    assert report.metric("score_sde", "T", "left") == pytest.approx(11.5)
    assert report.metric("repaint", "N") == pytest.approx(21.5)
    assert report.metric("repaint", "N", kind="psnr_median") == pytest.approx(21.5)
    assert report.metric("repaint", "A_s", kind="ssim_mean") == pytest.approx(0.215)
    with pytest.raises(KeyError):
        report.metric("mcg")


def test_aggregate_timings(spec, records):
    """Test timing rows carry the measured and expected call counts."""
    report = Report.aggregate(spec, T=100, cases=records, expected={"score_sde": (100, 100, 0), "repaint": (100, 200, 0)})
    timings = {t.algorithm: t for t in report.timings}
    assert timings["repaint"].expected_forward == 200
    assert timings["score_sde"].forward_calls == 100
    assert timings["score_sde"].seconds_mean == pytest.approx(1.5)


def test_report_write_and_read(spec, records):
    """Test the text and JSON reports are written and the JSON reads back."""
    report = Report.aggregate(
        spec, T=100, cases=records, expected={"score_sde": (100, 100, 0), "repaint": (100, 200, 0)}, checkpoint_step=42
    )
    text_path, json_path = report.write()
    assert text_path == spec.report_path.with_suffix(".txt")
    text = text_path.read_text()
    assert "checkpoint step 42" in text
    assert "score_sde" in text and "repaint" in text

    loaded = Report.read(json_path)
    assert loaded.checkpoint_step == 42
    assert loaded.rows == report.rows
    assert math.isinf(loaded.cases[0].psnr["A_d"])


def test_report_write_explicit_path(spec, records, tmp_path):
    """Test an explicit path overrides the configured one."""
    report = Report.aggregate(spec, T=100, cases=records, expected={"score_sde": (100, 100, 0), "repaint": (100, 200, 0)})
    text_path, json_path = report.write(tmp_path / "other")
    assert text_path.exists() and json_path.exists()
    assert not spec.report_path.with_suffix(".txt").exists()
