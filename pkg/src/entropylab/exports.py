# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
File outputs: CSV tables, plot series and the suite report.

Every write goes to a temp file in the destination directory and is renamed
into place.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import tempfile
import time
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import psutil

from .exceptions import SchemaVersionError
from .models import SCHEMA_VERSION, SuiteReportModel

logger = logging.getLogger(__name__)


def _atomic_write(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    """Header row, RFC-4180 quoting, round-trip float precision."""
    text = frame.to_csv(index=False, quoting=csv.QUOTE_MINIMAL, float_format="%.17g", lineterminator="\r\n")
    logger.debug("writing %d rows to %s", len(frame), path)
    return _atomic_write(path, text)


def write_series(path: Path, x: Sequence[float], y: Sequence[float], label: str) -> Path:
    """Plot-ready {x, y, label} JSON."""
    payload = {
        "schema_version": SCHEMA_VERSION,
        "label": label,
        "x": [float(v) for v in np.asarray(x, dtype=np.float64)],
        "y": [None if not np.isfinite(v) else float(v) for v in np.asarray(y, dtype=np.float64)],
    }
    return _atomic_write(path, json.dumps(payload, indent=1))


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    data = {"schema_version": SCHEMA_VERSION, **payload}
    return _atomic_write(path, json.dumps(data, indent=2, sort_keys=True, default=_jsonable))


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def report_content_hash(report: SuiteReportModel) -> str:
    """SHA-256 of the report with the timings block left out."""
    body = report.model_dump(mode="json", exclude={"timings"})
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode("utf-8")).hexdigest()


def write_report(report: SuiteReportModel, out_dir: Path) -> tuple[Path, Path]:
    """Report JSON plus the flat check CSV."""
    out_dir = Path(out_dir)
    json_path = _atomic_write(out_dir / "report.json", report.model_dump_json(indent=2))
    rows = [
        {
            "check_id": c.id,
            "lhs": c.lhs,
            "rhs": c.rhs,
            "margin": c.margin,
            "pass": c.passed,
            "class": c.slackness,
        }
        for c in report.checks
    ]
    csv_path = write_csv(pd.DataFrame(rows, columns=["check_id", "lhs", "rhs", "margin", "pass", "class"]), out_dir / "checks.csv")
    logger.info("report written to %s (content hash %s)", json_path, report_content_hash(report)[:12])
    return json_path, csv_path


def read_report(path: Path) -> SuiteReportModel:
    """
    Load a report, rejecting unknown major schema versions.

    Raises:
        SchemaVersionError: If the file's major version is unsupported
    """
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    found = str(raw.get("schema_version", "0"))
    if found.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
        raise SchemaVersionError(str(path), found, SCHEMA_VERSION)
    return SuiteReportModel.model_validate(raw)


class Timer:
    """Wall seconds per named phase and the process's peak resident memory."""

    def __init__(self) -> None:
        self.timings: dict[str, float] = {}
        self._process = psutil.Process()
        self._peak = self._process.memory_info().rss

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start
            self._peak = max(self._peak, self._process.memory_info().rss)

    def summary(self) -> dict[str, float]:
        return {**self.timings, "peak_rss_mb": self._peak / 1024 / 1024}
