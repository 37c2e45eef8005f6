"""Error handling utilities for MMAP-BIRL."""

import logging
import time
import traceback
from enum import Enum
from typing import Any, Dict, List, Optional


class ErrorSeverity(str, Enum):
    """Error severity levels."""
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class ErrorCategory(str, Enum):
    """Error categories for better classification."""
    VALIDATION = "validation"
    NUMERICAL = "numerical"
    CONVERGENCE = "convergence"
    DATA = "data"
    FILE_FORMAT = "file_format"
    FILE_SYSTEM = "file_system"
    CONFIGURATION = "configuration"
    UNKNOWN = "unknown"


class BirlError(Exception):
    """Base exception for all MMAP-BIRL errors."""

    def __init__(
        self,
        message: str,
        category: ErrorCategory = ErrorCategory.UNKNOWN,
        severity: ErrorSeverity = ErrorSeverity.MEDIUM,
        details: Optional[Dict[str, Any]] = None,
        suggested_actions: Optional[List[str]] = None
    ):
        super().__init__(message)
        self.message = message
        self.category = category
        self.severity = severity
        self.details = details or {}
        self.suggested_actions = suggested_actions or []
        self.traceback_str = traceback.format_exc()


class ValidationError(BirlError):
    """Input validation errors."""

    def __init__(
        self,
        message: str,
        field_name: Optional[str] = None,
        field_value: Optional[Any] = None,
        **kwargs: Any
    ):
        super().__init__(message, category=ErrorCategory.VALIDATION, **kwargs)
        self.field_name = field_name
        self.field_value = field_value


class SolverConvergenceError(BirlError):
    """Policy iteration did not reach the Bellman tolerance."""

    def __init__(
        self,
        message: str,
        residual: Optional[float] = None,
        iterations: Optional[int] = None,
        **kwargs: Any
    ):
        super().__init__(
            message, category=ErrorCategory.CONVERGENCE, severity=ErrorSeverity.HIGH, **kwargs
        )
        self.residual = residual
        self.iterations = iterations


class NumericalError(BirlError):
    """Linear solves that fail, underflow, non-finite intermediates."""

    def __init__(self, message: str, operation: Optional[str] = None, **kwargs: Any):
        super().__init__(message, category=ErrorCategory.NUMERICAL, **kwargs)
        self.operation = operation


class ZeroLikelihoodError(BirlError):
    """An observed trajectory has probability exactly zero under the model."""

    def __init__(
        self,
        message: str,
        trajectory_index: Optional[int] = None,
        timestep: Optional[int] = None,
        **kwargs: Any
    ):
        super().__init__(message, category=ErrorCategory.DATA, **kwargs)
        self.trajectory_index = trajectory_index
        self.timestep = timestep


class EnumerationLimitError(BirlError):
    """Brute-force enumeration would exceed the configured size guard."""

    def __init__(self, message: str, size: Optional[int] = None, limit: Optional[int] = None, **kwargs: Any):
        super().__init__(message, category=ErrorCategory.VALIDATION, **kwargs)
        self.size = size
        self.limit = limit


class DivergenceError(BirlError):
    """Gradient ascent produced non-finite weights."""

    def __init__(
        self,
        message: str,
        iteration_trace: Optional[List[Dict[str, Any]]] = None,
        **kwargs: Any
    ):
        super().__init__(
            message, category=ErrorCategory.NUMERICAL, severity=ErrorSeverity.HIGH, **kwargs
        )
        self.iteration_trace = iteration_trace or []


class FormatError(BirlError):
    """Parse errors in trajectory, environment, weights and result files."""

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        line_number: Optional[int] = None,
        **kwargs: Any
    ):
        if line_number is not None:
            message = f"{path or '<input>'}:{line_number}: {message}"
        super().__init__(message, category=ErrorCategory.FILE_FORMAT, **kwargs)
        self.path = path
        self.line_number = line_number


class ConfigurationError(BirlError):
    """Invalid or inconsistent experiment configuration."""

    def __init__(
        self,
        message: str,
        config_path: Optional[str] = None,
        field_errors: Optional[List[str]] = None,
        **kwargs: Any
    ):
        super().__init__(message, category=ErrorCategory.CONFIGURATION, **kwargs)
        self.config_path = config_path
        self.field_errors = field_errors or []


def get_error_guidance(error: Exception) -> List[str]:
    """Provide suggested actions for common error types."""
    suggestions = []

    if isinstance(error, ZeroLikelihoodError):
        suggestions.extend([
            "Check that the observation indices match the environment's observation model",
            "Verify the trajectory batch was generated for the same environment and noise level",
            "Use a Boltzmann policy with finite beta so every action has support"
        ])
    elif isinstance(error, SolverConvergenceError):
        suggestions.extend([
            "Lower the discount factor or rescale the reward weights",
            "Check the transition tensor for near-singular structure"
        ])
    elif isinstance(error, DivergenceError):
        suggestions.extend([
            "Reduce the ascent step size",
            "Increase the decay so the step size shrinks faster",
            "Tighten the prior variance"
        ])
    elif isinstance(error, EnumerationLimitError):
        suggestions.extend([
            "Use forward_backward instead of enumeration for this instance size",
            "Shorten the trajectory used for the oracle check"
        ])
    elif isinstance(error, FormatError):
        suggestions.extend([
            "Inspect the reported line of the input file",
            "Regenerate the file with the matching writer"
        ])
    elif isinstance(error, ConfigurationError):
        suggestions.extend([
            "Check the field names and values in the YAML config",
            "Compare against the configs shipped under configs/"
        ])
    elif isinstance(error, ValidationError):
        suggestions.extend([
            "Check input array shapes",
            "Verify probability rows sum to one",
            "Ensure rates lie in [0, 1]"
        ])
    elif isinstance(error, NumericalError):
        suggestions.extend([
            "Check inputs for NaN or infinite entries",
            "Reduce the Boltzmann beta or the reward scale"
        ])
    else:
        suggestions.extend([
            "Re-run with --log-level DEBUG for more detail",
            "Check system resources"
        ])

    return suggestions


def format_error_response(
    error: Exception,
    context: Optional[Dict[str, Any]] = None,
    include_traceback: bool = False
) -> Dict[str, Any]:
    """Format a standardized error response."""
    context = context or {}

    error_details: Dict[str, Any] = dict(getattr(error, "details", {}) or {})

    if isinstance(error, ValidationError):
        error_details.update({
            "field_name": error.field_name,
            "field_value": repr(error.field_value) if error.field_value is not None else None
        })
    elif isinstance(error, ZeroLikelihoodError):
        error_details.update({
            "trajectory_index": error.trajectory_index,
            "timestep": error.timestep
        })
    elif isinstance(error, SolverConvergenceError):
        error_details.update({
            "residual": error.residual,
            "iterations": error.iterations
        })
    elif isinstance(error, FormatError):
        error_details.update({
            "path": error.path,
            "line_number": error.line_number
        })
    elif isinstance(error, DivergenceError):
        error_details.update({"iterations_recorded": len(error.iteration_trace)})
    elif isinstance(error, ConfigurationError):
        error_details.update({
            "config_path": error.config_path,
            "field_errors": error.field_errors
        })

    response = {
        "success": False,
        "error": {
            "type": error.__class__.__name__,
            "message": str(error),
            "category": getattr(error, "category", ErrorCategory.UNKNOWN).value,
            "severity": getattr(error, "severity", ErrorSeverity.MEDIUM).value,
            "details": error_details,
            "context": context,
            "suggested_actions": getattr(error, "suggested_actions", []) or get_error_guidance(error)
        }
    }

    if include_traceback and hasattr(error, "traceback_str"):
        response["error"]["traceback"] = error.traceback_str

    return response


def handle_error(
    error: Exception,
    context: Optional[Dict[str, Any]] = None,
    logger: Optional[logging.Logger] = None,
    include_traceback: bool = False
) -> Dict[str, Any]:
    """Handle an error and return a formatted response."""
    if logger:
        logger.error(f"Error occurred: {error.__class__.__name__}: {error}")
        if context:
            logger.error(f"Error context: {context}")

        if getattr(error, "severity", None) in (ErrorSeverity.HIGH, ErrorSeverity.CRITICAL):
            logger.error(f"Traceback: {getattr(error, 'traceback_str', '')}")

    return format_error_response(error, context, include_traceback)


def create_success_response(
    data: Any,
    processing_time: Optional[float] = None,
    metadata: Optional[Dict[str, Any]] = None,
    warnings: Optional[List[str]] = None
) -> Dict[str, Any]:
    """Create a standardized success response."""
    response: Dict[str, Any] = {
        "success": True,
        "data": data
    }

    if processing_time is not None:
        response["processing_time"] = processing_time

    if metadata:
        response["metadata"] = metadata

    if warnings:
        response["warnings"] = warnings

    return response


class ErrorContext:
    """Context manager for error handling with automatic context capture."""

    def __init__(
        self,
        operation: str,
        logger: Optional[logging.Logger] = None,
        context: Optional[Dict[str, Any]] = None
    ):
        self.operation = operation
        self.logger = logger or logging.getLogger(__name__)
        self.context = context or {}
        self.start_time: Optional[float] = None

    def __enter__(self) -> "ErrorContext":
        self.start_time = time.perf_counter()
        self.logger.info(f"Starting operation: {self.operation}")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> bool:  # type: ignore[no-untyped-def]
        processing_time = time.perf_counter() - self.start_time if self.start_time else 0.0

        if exc_type is None:
            self.logger.info(f"Operation completed: {self.operation} in {processing_time:.2f}s")
            return False

        self.logger.error(f"Operation failed: {self.operation} in {processing_time:.2f}s")
        self.context["processing_time"] = processing_time
        self.context["operation"] = self.operation

        if not isinstance(exc_val, BirlError):
            details = {"original_exception": exc_type.__name__, **self.context}
            raise BirlError(message=str(exc_val), details=details) from exc_val

        exc_val.details.update(self.context)
        return False
