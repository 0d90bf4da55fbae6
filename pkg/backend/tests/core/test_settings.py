"""
Settings and Logging Tests

Environment-driven configuration, the exception hierarchy and the JSON
log formatter.
"""

import json
import logging

import pytest
from pydantic import ValidationError

from app.core.exceptions import (
    AppException,
    CheckpointError,
    ContainerFormatError,
    NonFiniteError,
    ShapeError,
    TrainingDivergedError,
)
from app.core.logging import ContextualJsonFormatter, command, get_logger, log_duration, run_id
from app.core.settings import DiffusionConfig, InpaintSettings, TensorConfig
from app.monitoring.prometheus import get_log_events, get_model_evaluations


def test_defaults():
    """Test the documented defaults."""
    diffusion = DiffusionConfig()
    assert (diffusion.T, diffusion.BETA_START, diffusion.BETA_END) == (1000, 1e-4, 0.02)
    assert TensorConfig().PRECISION == "float32"
    assert InpaintSettings().REPAINT_N == 10


def test_environment_overrides(monkeypatch):
    """Test prefixed environment variables override defaults."""
    monkeypatch.setenv("DIFFUSION_T", "250")
    monkeypatch.setenv("TENSOR_PRECISION", "float64")
    monkeypatch.setenv("INPAINT_ALGORITHM", "repaint")
    assert DiffusionConfig().T == 250
    assert TensorConfig().PRECISION == "float64"
    assert InpaintSettings().ALGORITHM == "repaint"


@pytest.mark.parametrize(
    "factory, env",
    [
        (DiffusionConfig, {"DIFFUSION_BETA_START": "0.5", "DIFFUSION_BETA_END": "0.1"}),
        (DiffusionConfig, {"DIFFUSION_T": "1"}),
        (TensorConfig, {"TENSOR_PRECISION": "float16"}),
        (InpaintSettings, {"INPAINT_ALGORITHM": "ddpm"}),
    ],
)
def test_invalid_environment(monkeypatch, factory, env):
    """Test invalid environment values are rejected."""
    for key, value in env.items():
        monkeypatch.setenv(key, value)
    with pytest.raises(ValidationError):
        factory()


def test_exception_hierarchy():
    """Test application errors also derive from the matching builtin."""
    assert issubclass(ShapeError, ValueError)
    assert issubclass(ContainerFormatError, IOError)
    assert issubclass(CheckpointError, OSError)
    assert issubclass(TrainingDivergedError, NonFiniteError)
    assert issubclass(NonFiniteError, FloatingPointError)

    error = ShapeError("bad shape", details={"shape": [2, 3]})
    assert isinstance(error, AppException)
    assert error.to_dict() == {"error": "ShapeError", "message": "bad shape", "details": {"shape": [2, 3]}}
    assert str(error) == "bad shape ({'shape': [2, 3]})"
    assert str(ShapeError()) == "Shape mismatch."


def test_json_formatter_includes_context():
    """Test records carry the run context, duration and tags."""
    formatter = ContextualJsonFormatter("%(timestamp)s %(level)s %(name)s %(message)s")
    record = logging.LogRecord("app.test", logging.INFO, __file__, 1, "hello", None, None)
    record.duration_ms = 12.5
    record.tags = ["cli"]
    run_token, command_token = run_id.set("abc123"), command.set("train")
    try:
        payload = json.loads(formatter.format(record))
    finally:
        run_id.reset(run_token)
        command.reset(command_token)
    assert payload["message"] == "hello"
    assert payload["level"] == "INFO"
    assert payload["run_id"] == "abc123"
    assert payload["command"] == "train"
    assert payload["duration_ms"] == 12.5
    assert payload["tags"] == ["cli"]


def test_log_duration(caplog):
    """Test log_duration emits one record with the operation and a duration."""
    logger = get_logger("app.test.duration")
    with caplog.at_level(logging.INFO, logger="app.test.duration"):
        with log_duration(logger, "unit", items=3):
            pass
    (record,) = caplog.records
    assert record.getMessage() == "unit completed"
    assert record.operation == "unit"
    assert record.items == 3
    assert record.duration_ms >= 0.0


def test_metric_singletons():
    """Test metric accessors return the same collector every time."""
    assert get_log_events() is get_log_events()
    counter = get_model_evaluations().labels(kind="forward", algorithm="unit")
    before = counter._value.get()
    counter.inc()
    assert counter._value.get() == before + 1
