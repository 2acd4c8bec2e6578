# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Pydantic v2 models for run configurations and suite reports with JSON Schema support.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .exceptions import ConfigurationError

SCHEMA_VERSION = "1.0"


class Tolerances(BaseModel):
    """Tolerances shared by every module."""

    model_config = ConfigDict(extra="forbid")

    tol_el: float = Field(1e-8, gt=0)
    tol_mass: float = Field(1e-6, gt=0)
    tol_v: float = Field(1e-3, gt=0)
    tol_l: float = Field(1e-6, gt=0)
    tol_w: float = Field(1e-4, gt=0)
    tol_check: float = Field(1e-6, gt=0)


class GeometryConfig(BaseModel):
    """Initial geometry as a preset string such as "sphere(3, 1.0)"."""

    model_config = ConfigDict(extra="forbid")

    preset: str
    n_cells: int = Field(512, ge=8)


class FlowConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["static_euclidean", "round_sphere_exact", "numerical_warped"]
    T: float = Field(gt=0)
    k: float = 1.0
    lam: float = 0.0
    dt: float = Field(1e-4, gt=0)
    n_slices: int = Field(20, ge=1)


class CheckConfig(BaseModel):
    """One enabled check with free-form parameters."""

    model_config = ConfigDict(extra="forbid")

    id: str
    params: Dict[str, Any] = Field(default_factory=dict)

    @property
    def is_control(self) -> bool:
        return self.id.startswith("control/") or bool(self.params.get("control", False))


class CachePolicy(BaseModel):
    model_config = ConfigDict(extra="forbid")

    enabled: bool = True
    directory: Optional[str] = None


class SolverConfig(BaseModel):
    """Knobs of the entropy and conjugate heat solvers."""

    model_config = ConfigDict(extra="forbid")

    max_iters: int = Field(50_000, ge=1)
    nu_points: int = Field(24, ge=2)
    steps_per_slice: int = Field(50, ge=1)
    n_sigma: int = Field(64, ge=4)


class RunConfig(BaseModel):
    """A complete batch run."""

    model_config = ConfigDict(extra="forbid")

    schema_version: str = SCHEMA_VERSION
    geometry: GeometryConfig
    flow: FlowConfig
    checks: List[CheckConfig] = Field(default_factory=list)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    output_dir: str = "entropylab-out"
    cache: CachePolicy = Field(default_factory=CachePolicy)

    @field_validator("schema_version")
    @classmethod
    def _known_major(cls, value: str) -> str:
        if value.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
            raise ValueError(f"unsupported schema_version {value}")
        return value

    @classmethod
    def from_file(cls, path: Path) -> RunConfig:
        """
        Load a JSON config.

        Raises:
            ConfigurationError: If the file is unreadable or fails validation
        """
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(str(path), f"cannot read config: {e}", "Check the path and JSON syntax")
        try:
            return cls.model_validate(raw)
        except ValidationError as e:
            first = e.errors()[0]
            key = ".".join(str(p) for p in first["loc"]) or "<root>"
            raise ConfigurationError(key, first["msg"], "See `entropylab schema` for the expected layout")

    def canonical_json(self, exclude: Optional[set[str]] = None) -> str:
        """Sorted-key JSON with shortest round-trip floats."""
        data = self.model_dump(mode="json", exclude=exclude)
        return json.dumps(data, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        """SHA-256 of the canonical dump, ignoring where outputs go."""
        payload = self.canonical_json(exclude={"output_dir", "cache"})
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def flow_key(self) -> str:
        """Cache key of the geometry and flow blocks."""
        block = {"geometry": self.geometry.model_dump(mode="json"), "flow": self.flow.model_dump(mode="json")}
        return hashlib.sha256(json.dumps(block, sort_keys=True).encode("utf-8")).hexdigest()


class CheckRecord(BaseModel):
    """JSON form of one check result."""

    id: str
    lhs: Optional[float]
    rhs: Optional[float]
    margin: Optional[float]
    passed: bool
    slackness: Literal["tight", "moderate", "astronomical"]
    skipped: bool = False
    control: bool = False
    log_space: bool = False
    inputs_digest: str
    metadata: Dict[str, Any] = Field(default_factory=dict)


class SuiteReportModel(BaseModel):
    """The report written by `entropylab verify`."""

    schema_version: str = SCHEMA_VERSION
    config_hash: str
    flow_provenance: Dict[str, Any] = Field(default_factory=dict)
    versions: Dict[str, str] = Field(default_factory=dict)
    checks: List[CheckRecord]
    artifacts: List[str] = Field(default_factory=list)
    timings: Dict[str, float] = Field(default_factory=dict)

    def all_passed(self) -> bool:
        """Exit criterion: every non-skipped check passes and no control is enabled."""
        active = [c for c in self.checks if not c.skipped]
        return all(c.passed and not c.control for c in active)

    def render(self, format: str = "text") -> str:
        """Render report in specified format."""
        if format == "json":
            return self.model_dump_json(indent=2)
        elif format == "text":
            return self._render_text()
        else:
            raise ValueError(f"Unsupported format: {format}")

    def _render_text(self) -> str:
        lines = [f"Suite report {self.config_hash[:12]}", "=" * 40]
        for c in self.checks:
            status = "SKIP" if c.skipped else ("PASS" if c.passed else "FAIL")
            margin = "n/a" if c.margin is None else f"{c.margin:.6g}"
            lines.append(f"  {status:4s} {c.id:40s} margin={margin} [{c.slackness}]")
        return "\n".join(lines)


def get_json_schema() -> Dict[str, Any]:
    """JSON Schemas for the run config and the suite report (Draft 2020-12)."""
    return {"config": RunConfig.model_json_schema(), "report": SuiteReportModel.model_json_schema()}
