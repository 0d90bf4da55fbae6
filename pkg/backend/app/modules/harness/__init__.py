"""Quality metrics and the frozen algorithm comparison."""

from app.modules.harness.metrics import psnr, ssim, table_psnr
from app.modules.harness.schemas import BenchmarkSpec, CaseRecord, MetricRow, PoseSpec, Report, TimingRow
from app.modules.harness.service import BenchmarkService, evaluate_maps, run_benchmark

__all__ = [
    "BenchmarkService",
    "BenchmarkSpec",
    "CaseRecord",
    "MetricRow",
    "PoseSpec",
    "Report",
    "TimingRow",
    "evaluate_maps",
    "psnr",
    "run_benchmark",
    "ssim",
    "table_psnr",
]
