# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Input validation utilities for robust error handling.

Small validators used at the public entry points of the numerical modules.
They raise ValidationError with an actionable suggestion instead of letting a
bad argument surface later as a NaN.
"""

from __future__ import annotations

from collections.abc import Sequence
from typing import Any, Optional, Union, overload

import numpy as np
import numpy.typing as npt

from .exceptions import ValidationError


@overload
def validate_number(
    value: Any,
    field_name: str,
    min_value: Optional[int] = None,
    max_value: Optional[int] = None,
    allow_zero: bool = True,
    number_type: type[int] = int,
) -> int: ...


@overload
def validate_number(
    value: Any,
    field_name: str,
    min_value: Optional[float] = None,
    max_value: Optional[float] = None,
    allow_zero: bool = True,
    number_type: type[float] = float,
) -> float: ...


def validate_number(
    value: Any,
    field_name: str,
    min_value: Optional[Union[int, float]] = None,
    max_value: Optional[Union[int, float]] = None,
    allow_zero: bool = True,
    number_type: type = float,
) -> Union[int, float]:
    """
    Validate that a value is a finite number with optional constraints.

    Args:
        value: The value to validate
        field_name: Name of the field for error messages
        min_value: Minimum allowed value (optional)
        max_value: Maximum allowed value (optional)
        allow_zero: Whether zero is allowed (default: True)
        number_type: Expected number type (int or float, default: float)

    Returns:
        The validated number

    Raises:
        ValidationError: If validation fails
    """
    if isinstance(value, bool):
        raise ValidationError(field_name, value, number_type.__name__, "Booleans are not numbers")
    try:
        validated_value = int(value) if number_type is int else float(value)
    except (ValueError, TypeError):
        raise ValidationError(
            field_name,
            value,
            f"{number_type.__name__}",
            f"Provide a valid numeric value for {field_name}",
        )

    if number_type is int and validated_value != value:
        raise ValidationError(field_name, value, "integer", f"Use a whole number for {field_name}")

    if not np.isfinite(validated_value):
        raise ValidationError(field_name, value, "finite number", f"{field_name} must be finite")

    if not allow_zero and validated_value == 0:
        raise ValidationError(
            field_name,
            value,
            "non-zero number",
            f"Provide a non-zero value for {field_name}",
        )

    if min_value is not None and validated_value < min_value:
        raise ValidationError(
            field_name,
            value,
            f"number >= {min_value}",
            f"Increase {field_name} to at least {min_value}",
        )

    if max_value is not None and validated_value > max_value:
        raise ValidationError(
            field_name,
            value,
            f"number <= {max_value}",
            f"Reduce {field_name} to at most {max_value}",
        )

    return validated_value


def validate_int(
    value: Any,
    field_name: str,
    min_value: Optional[int] = None,
    max_value: Optional[int] = None,
) -> int:
    """Validate integer values with type narrowing."""
    return validate_number(value, field_name, min_value, max_value, True, int)


def validate_float(
    value: Any,
    field_name: str,
    min_value: Optional[float] = None,
    max_value: Optional[float] = None,
    allow_zero: bool = True,
) -> float:
    """Validate float values with type narrowing."""
    return validate_number(value, field_name, min_value, max_value, allow_zero, float)


def validate_positive(value: Any, field_name: str) -> float:
    """Validate a strictly positive float (times, radii, scales, tolerances)."""
    number = validate_float(value, field_name, min_value=0.0, allow_zero=False)
    return number


def validate_dimension(value: Any) -> int:
    """Manifold dimension m; the explicit constants used throughout need m >= 3."""
    return validate_int(value, "dimension m", min_value=3)


def validate_choice(value: Any, field_name: str, choices: Sequence[str]) -> str:
    """Validate that a value is one of a fixed set of strings."""
    if value not in choices:
        raise ValidationError(
            field_name,
            value,
            f"one of {', '.join(choices)}",
            f"Pick a supported {field_name}",
        )
    return str(value)


def validate_array(
    value: Any,
    field_name: str,
    min_length: int = 1,
    length: Optional[int] = None,
    nonnegative: bool = False,
) -> npt.NDArray[np.float64]:
    """
    Validate a one-dimensional array of finite floats.

    Args:
        value: Anything np.asarray accepts
        field_name: Name of the field for error messages
        min_length: Minimum number of samples
        length: Exact number of samples (optional)
        nonnegative: Reject negative entries

    Returns:
        A float64 copy of the array
    """
    arr = np.array(value, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(field_name, arr, "1-D array", "Pass a flat sequence of samples")
    if arr.size < min_length:
        raise ValidationError(
            field_name, arr, f"at least {min_length} samples", "Use a finer grid"
        )
    if length is not None and arr.size != length:
        raise ValidationError(
            field_name, arr, f"exactly {length} samples", "Sample on the matching grid"
        )
    if not np.all(np.isfinite(arr)):
        raise ValidationError(field_name, arr, "finite values", "Remove NaN/inf samples")
    if nonnegative and np.any(arr < 0):
        raise ValidationError(field_name, arr, "nonnegative values", "Clip or rescale the samples")
    return arr
