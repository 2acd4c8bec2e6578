# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
SQLite persistence of FlowSolution objects.

One database file per cache key. Arrays are stored row by row as raw
little-endian float64 bytes, so a loaded flow is bit-identical to the one
that was saved.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np
from sqlalchemy import (
    Column,
    Float,
    Integer,
    LargeBinary,
    MetaData,
    String,
    Table,
    Text,
    create_engine,
    select,
)
from sqlalchemy.engine import Engine
from sqlalchemy.exc import SQLAlchemyError

from .exceptions import CacheError, SchemaVersionError
from .flow import FlowSolution

logger = logging.getLogger(__name__)

CACHE_SCHEMA_VERSION = "1.0"
ENV_CACHE = "ENTROPYLAB_CACHE"

_ARRAYS = ("x", "times", "warp", "phi")


def _tables(metadata: MetaData) -> tuple[Table, Table]:
    meta = Table(
        "flow_meta",
        metadata,
        Column("id", Integer, primary_key=True),
        Column("schema_version", String(16), nullable=False),
        Column("m", Integer, nullable=False),
        Column("topology", String(16), nullable=False),
        Column("kind", String(32), nullable=False),
        Column("k", Float, nullable=False),
        Column("lam", Float, nullable=False),
        Column("a0", Float),
        Column("provenance", Text, nullable=False),
    )
    arrays = Table(
        "flow_arrays",
        metadata,
        Column("name", String(16), primary_key=True),
        Column("row", Integer, primary_key=True),
        Column("payload", LargeBinary, nullable=False),
    )
    return meta, arrays


def create_cache_tables(engine: Engine) -> tuple[Table, Table]:
    """Create the cache tables if they don't exist."""
    metadata = MetaData()
    meta, arrays = _tables(metadata)
    metadata.create_all(engine, checkfirst=True)
    return meta, arrays


def resolve_cache_dir(option: Optional[str]) -> Optional[Path]:
    """ENTROPYLAB_CACHE overrides the command-line directory."""
    env = os.environ.get(ENV_CACHE)
    chosen = env or option
    return Path(chosen) if chosen else None


class FlowCache:
    """Flow files under a cache directory, one per key."""

    def __init__(self, directory: Path) -> None:
        self.directory = Path(directory)

    def path_for(self, key: str) -> Path:
        return self.directory / f"flow-{key[:32]}.sqlite"

    def save(self, key: str, flow: FlowSolution) -> Path:
        """Write the flow to a temp file and rename it into place."""
        self.directory.mkdir(parents=True, exist_ok=True)
        target = self.path_for(key)
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".sqlite.tmp")
        os.close(fd)
        engine = create_engine(f"sqlite:///{tmp}")
        try:
            meta, arrays = create_cache_tables(engine)
            with engine.begin() as conn:
                conn.execute(
                    meta.insert().values(
                        schema_version=CACHE_SCHEMA_VERSION,
                        m=flow.m,
                        topology=flow.topology,
                        kind=flow.kind,
                        k=flow.k,
                        lam=flow.lam,
                        a0=flow.a0,
                        provenance=json.dumps(flow.provenance, sort_keys=True),
                    )
                )
                rows = []
                for name in _ARRAYS:
                    data = np.atleast_2d(np.asarray(getattr(flow, name), dtype="<f8"))
                    rows.extend({"name": name, "row": i, "payload": r.tobytes()} for i, r in enumerate(data))
                conn.execute(arrays.insert(), rows)
        except SQLAlchemyError as e:
            Path(tmp).unlink(missing_ok=True)
            raise CacheError(str(target), f"write failed: {e}")
        finally:
            engine.dispose()
        os.replace(tmp, target)
        logger.info("cached flow %s at %s", flow.kind, target)
        return target

    def load(self, key: str) -> Optional[FlowSolution]:
        """
        Load a cached flow, or None on a miss.

        Raises:
            SchemaVersionError: If the file was written by an unknown major version
            CacheError: If the file is unreadable
        """
        path = self.path_for(key)
        if not path.exists():
            return None
        engine = create_engine(f"sqlite:///{path}")
        try:
            meta, arrays = _tables(MetaData())
            with engine.connect() as conn:
                row = conn.execute(select(meta)).mappings().first()
                if row is None:
                    raise CacheError(str(path), "no flow metadata")
                found = str(row["schema_version"])
                if found.split(".")[0] != CACHE_SCHEMA_VERSION.split(".")[0]:
                    raise SchemaVersionError(str(path), found, CACHE_SCHEMA_VERSION)
                data: dict[str, list[np.ndarray]] = {name: [] for name in _ARRAYS}
                for rec in conn.execute(select(arrays).order_by(arrays.c.name, arrays.c.row)):
                    data[rec.name].append(np.frombuffer(rec.payload, dtype="<f8"))
        except SQLAlchemyError as e:
            raise CacheError(str(path), f"read failed: {e}")
        finally:
            engine.dispose()
        flow = FlowSolution(
            m=int(row["m"]),
            topology=str(row["topology"]),
            kind=str(row["kind"]),
            x=data["x"][0].astype(np.float64),
            times=data["times"][0].astype(np.float64),
            warp=np.vstack(data["warp"]).astype(np.float64),
            phi=np.vstack(data["phi"]).astype(np.float64),
            k=float(row["k"]),
            lam=float(row["lam"]),
            a0=None if row["a0"] is None else float(row["a0"]),
            provenance=json.loads(row["provenance"]),
        )
        logger.info("loaded cached flow from %s", path)
        return flow
