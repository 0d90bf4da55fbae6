"""
Process-local Prometheus metrics.

Every accessor returns a singleton so that a metric is only registered once
per process, even when modules are reloaded by the test runner.
"""

from prometheus_client import Counter, Gauge, Histogram


def get_log_events() -> Counter:
    """Counter of emitted log records."""
    if not hasattr(get_log_events, "_counter"):
        get_log_events._counter = Counter(
            "log_events_total",
            "Total number of log events",
            ["level", "module"],
        )
    return get_log_events._counter


def get_model_evaluations() -> Counter:
    """Counter of denoiser passes, split by pass kind and caller."""
    if not hasattr(get_model_evaluations, "_counter"):
        get_model_evaluations._counter = Counter(
            "denoiser_evaluations_total",
            "Denoiser forward and backward passes",
            ["kind", "algorithm"],
        )
    return get_model_evaluations._counter


def get_sampler_latency() -> Histogram:
    """Histogram of full sampler wall time."""
    if not hasattr(get_sampler_latency, "_histogram"):
        get_sampler_latency._histogram = Histogram(
            "sampler_duration_seconds",
            "Wall time of one guided sampling run",
            ["algorithm"],
            buckets=(0.1, 0.5, 1, 5, 15, 60, 300, 1200, 3600),
        )
    return get_sampler_latency._histogram


def get_training_loss() -> Gauge:
    """Gauge of the most recent training loss."""
    if not hasattr(get_training_loss, "_gauge"):
        get_training_loss._gauge = Gauge(
            "training_loss",
            "Most recent denoiser training loss",
        )
    return get_training_loss._gauge
