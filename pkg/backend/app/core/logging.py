"""
Logging Configuration Module

This module provides the logging setup shared by every command:
- Structured JSON logging with run-scoped context
- Exception capture with full tracebacks
- Metrics integration
- Duration logging for long numerical operations
"""

import contextlib
import logging
import logging.config
import sys
import time
import traceback
from contextvars import ContextVar
from datetime import datetime, timezone
from logging import LogRecord
from typing import Any, Dict, Iterator, Optional

from pythonjsonlogger import jsonlogger
from typing_extensions import Protocol

from app.core.settings import settings
from app.monitoring.prometheus import get_log_events

# Context variables for run-scoped data
run_id: ContextVar[str] = ContextVar("run_id", default="")
command: ContextVar[str] = ContextVar("command", default="")


class LoggerProtocol(Protocol):
    """Protocol defining the interface for loggers."""
    def debug(self, msg: str, *args: Any, **kwargs: Any) -> None: ...
    def info(self, msg: str, *args: Any, **kwargs: Any) -> None: ...
    def warning(self, msg: str, *args: Any, **kwargs: Any) -> None: ...
    def error(self, msg: str, *args: Any, **kwargs: Any) -> None: ...


class ContextualJsonFormatter(jsonlogger.JsonFormatter):
    """
    JSON formatter that adds timestamps, run context and timing fields.
    """

    def add_fields(
        self,
        log_record: Dict[str, Any],
        record: LogRecord,
        message_dict: Dict[str, Any]
    ) -> None:
        super().add_fields(log_record, record, message_dict)

        log_record["timestamp"] = datetime.fromtimestamp(record.created, timezone.utc).isoformat()
        log_record["level"] = record.levelname

        if run_id.get():
            log_record["run_id"] = run_id.get()
        if command.get():
            log_record["command"] = command.get()

        if hasattr(record, "duration_ms"):
            log_record["duration_ms"] = record.duration_ms

        if record.exc_info:
            exc_type, exc_value, exc_tb = record.exc_info
            log_record["exception"] = {
                "type": exc_type.__name__,
                "message": str(exc_value),
                "traceback": traceback.format_exception(exc_type, exc_value, exc_tb),
            }

        if hasattr(record, "tags") and record.tags:
            log_record["tags"] = record.tags


class MetricsFilter(logging.Filter):
    """Counts log events per level and logger."""

    def filter(self, record: LogRecord) -> bool:
        if settings.monitoring.ENABLE_METRICS:
            get_log_events().labels(level=record.levelname, module=record.name).inc()
        return True


@contextlib.contextmanager
def log_duration(logger: LoggerProtocol, operation: str, **fields: Any) -> Iterator[None]:
    """
    Context manager to log operation duration.
    """
    start_time = time.perf_counter()
    try:
        yield
    finally:
        duration = (time.perf_counter() - start_time) * 1000
        logger.info(
            f"{operation} completed",
            extra={"duration_ms": duration, "operation": operation, **fields},
        )


def setup_logging(level: Optional[str] = None, json_logs: Optional[bool] = None) -> None:
    """
    Configure logging with the JSON formatter and handlers.

    Console output goes to stderr so that command output on stdout stays
    machine-readable.
    """
    level = level or settings.logging.LEVEL
    use_json = settings.logging.JSON_LOGS if json_logs is None else json_logs

    handlers: Dict[str, Dict[str, Any]] = {
        "console": {
            "class": "logging.StreamHandler",
            "stream": sys.stderr,
            "formatter": "json" if use_json else "plain",
            "filters": ["metrics"],
        }
    }

    if settings.logging.LOG_FILE_PATH:
        log_path = settings.logging.LOG_FILE_PATH
        log_path.parent.mkdir(parents=True, exist_ok=True)
        handlers["file"] = {
            "class": "logging.handlers.RotatingFileHandler",
            "filename": str(log_path),
            "maxBytes": 10485760,  # 10MB
            "backupCount": 5,
            "formatter": "json",
        }

    logging.config.dictConfig({
        "version": 1,
        "disable_existing_loggers": False,
        "filters": {"metrics": {"()": MetricsFilter}},
        "formatters": {
            "json": {
                "()": ContextualJsonFormatter,
                "format": "%(timestamp)s %(level)s %(name)s %(message)s",
                "json_ensure_ascii": False,
            },
            "plain": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
        },
        "handlers": handlers,
        "root": {"level": level, "handlers": list(handlers.keys())},
        "loggers": {"PIL": {"level": "WARNING"}},
    })

    get_logger(__name__).debug(
        "Logging configured",
        extra={"tags": ["startup", "logging"], "log_level": level},
    )


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger instance with the given name.

    Args:
        name: The name of the logger (typically __name__)

    Returns:
        A standard library logger; formatting is installed by setup_logging
    """
    return logging.getLogger(name)
