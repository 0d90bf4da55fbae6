from typing import Any, Optional


class AppException(Exception):
    """
    Base application exception for custom error handling.
    """
    def __init__(
        self,
        message: str = "An unexpected error occurred.",
        details: Optional[Any] = None,
    ):
        self.message = message
        self.details = details
        super().__init__(message)

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": self.message, "details": self.details}

    def __str__(self) -> str:
        if self.details is None:
            return self.message
        return f"{self.message} ({self.details})"


class ShapeError(AppException, ValueError):
    def __init__(self, message: str = "Shape mismatch.", details: Optional[Any] = None):
        super().__init__(message=message, details=details)


class TapeError(AppException, RuntimeError):
    def __init__(self, message: str = "Tensor is not recorded on this tape.", details: Optional[Any] = None):
        super().__init__(message=message, details=details)


class NonFiniteError(AppException, FloatingPointError):
    def __init__(
        self,
        message: str = "Non-finite values encountered.",
        details: Optional[Any] = None,
        step: Optional[int] = None,
    ):
        self.step = step
        super().__init__(message=message, details=details)


class ScheduleError(AppException, ValueError):
    def __init__(self, message: str = "Invalid noise schedule or timestep.", details: Optional[Any] = None):
        super().__init__(message=message, details=details)


class ConfigurationError(AppException, ValueError):
    def __init__(self, message: str = "Invalid configuration.", details: Optional[Any] = None):
        super().__init__(message=message, details=details)


class ContainerFormatError(AppException, IOError):
    def __init__(self, message: str = "Malformed tensor container.", details: Optional[Any] = None):
        super().__init__(message=message, details=details)


class CheckpointError(AppException, IOError):
    def __init__(self, message: str = "Checkpoint is missing or incompatible.", details: Optional[Any] = None):
        super().__init__(message=message, details=details)


class DatasetError(AppException, IOError):
    def __init__(self, message: str = "Dataset is empty or unreadable.", details: Optional[Any] = None):
        super().__init__(message=message, details=details)


class ResolutionError(AppException, ValueError):
    def __init__(self, message: str = "Resolution mismatch.", details: Optional[Any] = None):
        super().__init__(message=message, details=details)


class DegenerateFitError(AppException, ValueError):
    def __init__(self, message: str = "Degenerate landmark configuration.", details: Optional[Any] = None):
        super().__init__(message=message, details=details)


class ViewportError(AppException, ValueError):
    def __init__(self, message: str = "Viewport has zero area.", details: Optional[Any] = None):
        super().__init__(message=message, details=details)


class MetricError(AppException, ValueError):
    def __init__(self, message: str = "Metric inputs are invalid.", details: Optional[Any] = None):
        super().__init__(message=message, details=details)


class TrainingDivergedError(NonFiniteError):
    def __init__(
        self,
        message: str = "Training loss became non-finite.",
        details: Optional[Any] = None,
        step: Optional[int] = None,
    ):
        super().__init__(message=message, details=details, step=step)
