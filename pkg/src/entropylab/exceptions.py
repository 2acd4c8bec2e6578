# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Custom exceptions for the entropylab package.

Every error raised by the package derives from EntropyLabError and carries the
same three pieces of information: a message, a details mapping for debugging
and an optional suggestion telling the caller how to recover.

Numerical non-convergence is not an exception. Solvers flag it on their result
objects (MuResult.converged, NuResult.approximate, ...) so a long verification
run never dies halfway through.

Example usage:
    try:
        evolve(geom, spec)
    except HorizonTruncatedError as e:
        logger.warning("flow stopped at t=%s", e.last_valid_time)
"""

from __future__ import annotations

from typing import Any, Literal, Optional

__all__ = [
    "EntropyLabError",
    "ValidationError",
    "ConfigurationError",
    "InvalidGeometryError",
    "DomainError",
    "HorizonTruncatedError",
    "SolverAccuracyError",
    "ConstructionError",
    "CacheError",
    "SchemaVersionError",
]

ErrorCode = Literal[
    "unknown",
    "validation",
    "configuration",
    "geometry",
    "domain",
    "solver",
    "construction",
    "cache",
]


class EntropyLabError(Exception):
    """Base exception for all entropylab errors."""

    def __init__(
        self,
        message: str,
        details: Optional[dict[str, Any]] = None,
        suggestion: Optional[str] = None,
        code: ErrorCode = "unknown",
    ) -> None:
        """
        Initialize the exception with detailed error information.

        Args:
            message: Human-readable error message
            details: Additional error context and debugging information
            suggestion: Suggested solution or next steps
            code: Error code for programmatic handling
        """
        super().__init__(message)
        self.message = message
        self.details = details or {}
        self.suggestion = suggestion
        self.code = code

    def __str__(self) -> str:
        """Return formatted error message with details and suggestions."""
        result = self.message

        if self.details:
            details_str = ", ".join(f"{k}={v}" for k, v in self.details.items())
            result += f" (Details: {details_str})"

        if self.suggestion:
            result += f" Suggestion: {self.suggestion}"

        return result


class ValidationError(EntropyLabError):
    """Raised when input validation fails."""

    def __init__(
        self,
        field: str,
        value: Any,
        expected: str,
        suggestion: Optional[str] = None,
    ) -> None:
        """
        Initialize validation error with field-specific information.

        Args:
            field: Name of the field that failed validation
            value: The invalid value that was provided
            expected: Description of what was expected
            suggestion: How to fix the validation error
        """
        shown = value if not hasattr(value, "shape") else f"array{getattr(value, 'shape')}"
        message = f"Invalid {field}: got {type(value).__name__} '{shown}', expected {expected}"
        details = {"field": field, "expected": expected}
        super().__init__(message, details, suggestion, "validation")
        self.field = field
        self.value = value
        self.expected = expected


class ConfigurationError(EntropyLabError):
    """Raised when a run configuration is invalid or refers to unknown things."""

    def __init__(self, config_key: str, issue: str, suggestion: Optional[str] = None) -> None:
        message = f"Configuration error for '{config_key}': {issue}"
        details = {"config_key": config_key, "issue": issue}
        super().__init__(message, details, suggestion, "configuration")
        self.config_key = config_key
        self.issue = issue


class InvalidGeometryError(EntropyLabError):
    """Raised when a warp profile violates the radial geometry invariants."""

    def __init__(
        self,
        reason: str,
        index: Optional[int] = None,
        suggestion: Optional[str] = None,
    ) -> None:
        details: dict[str, Any] = {"reason": reason}
        if index is not None:
            details["index"] = index
        super().__init__(
            f"Invalid radial geometry: {reason}",
            details,
            suggestion or "Check the warp samples: positive inside, zero at poles, unit slope there",
            "geometry",
        )
        self.reason = reason
        self.index = index


class DomainError(EntropyLabError):
    """Raised when a point, curve or ball lies outside the available space-time."""

    def __init__(self, operation: str, reason: str, suggestion: Optional[str] = None) -> None:
        message = f"Domain error in '{operation}': {reason}"
        details = {"operation": operation, "reason": reason}
        super().__init__(message, details, suggestion, "domain")
        self.operation = operation
        self.reason = reason


class HorizonTruncatedError(EntropyLabError):
    """Raised when a flow goes extinct before the requested horizon."""

    def __init__(self, last_valid_time: float, requested: float, reason: str) -> None:
        super().__init__(
            f"Flow stopped before T={requested:g}: {reason}",
            {"last_valid_time": last_valid_time, "requested": requested},
            f"Request a horizon below {last_valid_time:g}",
            "solver",
        )
        self.last_valid_time = last_valid_time
        self.requested = requested


class SolverAccuracyError(EntropyLabError):
    """Raised when a solver drifts beyond its accuracy budget."""

    def __init__(self, solver: str, slice_index: int, drift: float, tolerance: float) -> None:
        super().__init__(
            f"{solver} lost accuracy at slice {slice_index}",
            {"slice_index": slice_index, "drift": drift, "tolerance": tolerance},
            "Refine the time step or the spatial grid",
            "solver",
        )
        self.solver = solver
        self.slice_index = slice_index
        self.drift = drift


class ConstructionError(EntropyLabError):
    """Raised when a constructed object fails its own certification."""

    def __init__(self, object_name: str, margins: dict[str, float]) -> None:
        failing = {k: v for k, v in margins.items() if v < 0}
        super().__init__(
            f"{object_name} failed certification",
            {"failing_margins": failing},
            "Refusing to return an uncertified object",
            "construction",
        )
        self.object_name = object_name
        self.margins = margins


class CacheError(EntropyLabError):
    """Raised when a cache or report file cannot be read or written."""

    def __init__(self, path: str, issue: str, suggestion: Optional[str] = None) -> None:
        super().__init__(
            f"Cache error for '{path}': {issue}",
            {"path": path, "issue": issue},
            suggestion or "Delete the cache file and rerun",
            "cache",
        )
        self.path = path
        self.issue = issue


class SchemaVersionError(CacheError):
    """Raised when a file declares a major schema version this build cannot read."""

    def __init__(self, path: str, found: str, supported: str) -> None:
        super().__init__(
            path,
            f"schema_version {found} is not readable (supported major: {supported})",
            "Regenerate the file with this version of entropylab",
        )
        self.found = found
        self.supported = supported
