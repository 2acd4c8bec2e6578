# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Tests for input validation and the exception hierarchy.
"""

import math

import numpy as np
import pytest

from entropylab.exceptions import (
    CacheError,
    ConstructionError,
    EntropyLabError,
    HorizonTruncatedError,
    SchemaVersionError,
    SolverAccuracyError,
    ValidationError,
)
from entropylab.validation import (
    validate_array,
    validate_choice,
    validate_dimension,
    validate_int,
    validate_positive,
)


class TestValidators:
    """Test the shared validators."""

    def test_positive(self):
        """Zero, negatives and non-finite values are rejected."""
        assert validate_positive(0.5, "tau") == 0.5
        for bad in (0.0, -1.0, math.inf, math.nan, "x"):
            with pytest.raises(ValidationError):
                validate_positive(bad, "tau")

    def test_int_rejects_bool(self):
        """Booleans are not counts."""
        with pytest.raises(ValidationError):
            validate_int(True, "n")

    def test_dimension(self):
        """m >= 3."""
        assert validate_dimension(4) == 4
        with pytest.raises(ValidationError) as exc:
            validate_dimension(2)
        assert exc.value.field == "dimension m"

    def test_choice(self):
        """Only listed strings pass."""
        assert validate_choice("north", "pole", ["north", "south"]) == "north"
        with pytest.raises(ValidationError):
            validate_choice("east", "pole", ["north", "south"])

    def test_array(self):
        """Arrays are copied to float64 and checked."""
        src = [1, 2, 3]
        arr = validate_array(src, "u", length=3, nonnegative=True)
        assert arr.dtype == np.float64
        for bad, kwargs in (([[1.0]], {}), ([1.0, np.nan], {}), ([1.0, -1.0], {"nonnegative": True}), ([1.0], {"length": 2})):
            with pytest.raises(ValidationError):
                validate_array(bad, "u", **kwargs)


class TestExceptions:
    """Test messages and codes of the exception hierarchy."""

    def test_common_base(self):
        """Every error is an EntropyLabError with a code."""
        errors = [
            HorizonTruncatedError(0.2, 0.3, "extinct"),
            SolverAccuracyError("solve_conjugate", 3, 1e-3, 1e-6),
            ConstructionError("bounded cutoff", {"gradient_square": -0.1}),
            CacheError("x.sqlite", "unreadable"),
        ]
        for e in errors:
            assert isinstance(e, EntropyLabError)
            assert e.code != "unknown"

    def test_schema_version_is_cache_error(self):
        """Schema mismatches are handled like other cache errors."""
        assert issubclass(SchemaVersionError, CacheError)

    def test_construction_margins(self):
        """Failing margins travel with the error."""
        e = ConstructionError("bounded cutoff", {"gradient_square": -0.1})
        assert e.margins["gradient_square"] == -0.1

    def test_message_has_suggestion(self):
        """Suggestions are appended to the message."""
        e = ValidationError("tau", -1.0, "positive number", "Use tau > 0")
        assert "Suggestion: Use tau > 0" in str(e)
