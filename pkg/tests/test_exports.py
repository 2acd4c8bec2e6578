# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Tests for file exports and timing.
"""

import json

import numpy as np
import pandas as pd
import pytest

from entropylab.exceptions import SchemaVersionError
from entropylab.exports import (
    Timer,
    read_report,
    report_content_hash,
    write_csv,
    write_json,
    write_report,
    write_series,
)
from entropylab.models import CheckRecord, SuiteReportModel


@pytest.fixture
def report():
    return SuiteReportModel(
        config_hash="h",
        checks=[
            CheckRecord(
                id="inclusion/strict@1-2",
                lhs=0.1,
                rhs=0.3,
                margin=0.2,
                passed=True,
                slackness="moderate",
                inputs_digest="d",
            )
        ],
        timings={"total": 1.0},
    )


class TestWriters:
    """Test CSV, series and JSON writers."""

    def test_csv_round_trip_precision(self, tmp_path):
        """Floats are written with 17 significant digits."""
        path = write_csv(pd.DataFrame({"s": [0.1], "psi": [1.0 / 3.0]}), tmp_path / "a.csv")
        back = pd.read_csv(path)
        assert back["psi"][0] == 1.0 / 3.0
        assert path.read_bytes().splitlines()[0] == b"s,psi"

    def test_series(self, tmp_path):
        """Non-finite y values become null."""
        path = write_series(tmp_path / "s.json", [0.0, 1.0], [1.0, float("nan")], "mu")
        data = json.loads(path.read_text())
        assert data["label"] == "mu"
        assert data["y"] == [1.0, None]

    def test_json_numpy(self, tmp_path):
        """numpy values serialize."""
        path = write_json(tmp_path / "x.json", {"a": np.arange(3), "b": np.float64(0.5)})
        data = json.loads(path.read_text())
        assert data["a"] == [0, 1, 2]
        assert data["b"] == 0.5
        assert "schema_version" in data


class TestReports:
    """Test report files."""

    def test_write_and_read(self, tmp_path, report):
        """The JSON report reads back and the CSV has one row per check."""
        json_path, csv_path = write_report(report, tmp_path)
        assert read_report(json_path) == report
        frame = pd.read_csv(csv_path)
        assert list(frame.columns) == ["check_id", "lhs", "rhs", "margin", "pass", "class"]
        assert len(frame) == 1

    def test_hash_ignores_timings(self, report):
        """Reruns with different timings hash identically."""
        other = report.model_copy(update={"timings": {"total": 9.0}})
        assert report_content_hash(report) == report_content_hash(other)

    def test_unknown_major(self, tmp_path, report):
        """Reports from another major version are rejected."""
        path = tmp_path / "report.json"
        path.write_text(json.dumps({**report.model_dump(mode="json"), "schema_version": "3.0"}))
        with pytest.raises(SchemaVersionError):
            read_report(path)


class TestTimer:
    """Test phase timing."""

    def test_phases_accumulate(self):
        """Each phase is timed and peak memory is reported."""
        timer = Timer()
        with timer.phase("solve"):
            pass
        with timer.phase("solve"):
            pass
        summary = timer.summary()
        assert summary["solve"] >= 0.0
        assert summary["peak_rss_mb"] > 0.0
