# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Tests for the SQLite flow cache.
"""

import numpy as np
import pytest
from sqlalchemy import create_engine, update

from entropylab.cache import ENV_CACHE, FlowCache, create_cache_tables, resolve_cache_dir
from entropylab.exceptions import SchemaVersionError
from entropylab.flow import FlowSpec, evolve
from entropylab.geometry import round_sphere
from entropylab.models import RunConfig
from entropylab.verify import prepare_flow


@pytest.fixture
def flow():
    return evolve(round_sphere(3, 1.0, 64), FlowSpec("round_sphere_exact", 0.1, n_slices=4))


class TestFlowCache:
    """Test saving and loading flows."""

    def test_miss(self, tmp_path):
        """An unknown key is a miss."""
        assert FlowCache(tmp_path).load("0" * 64) is None

    def test_bit_identical(self, tmp_path, flow):
        """Loaded arrays equal the saved ones bit for bit."""
        cache = FlowCache(tmp_path)
        path = cache.save("a" * 64, flow)
        assert path.exists()
        loaded = cache.load("a" * 64)
        for name in ("x", "times", "warp", "phi"):
            np.testing.assert_array_equal(getattr(loaded, name), getattr(flow, name))
        assert loaded.kind == flow.kind
        assert loaded.a0 == flow.a0
        assert loaded.provenance == flow.provenance

    def test_no_temp_files_left(self, tmp_path, flow):
        """Writes go through a temp file that is renamed away."""
        FlowCache(tmp_path).save("b" * 64, flow)
        assert not list(tmp_path.glob("*.tmp"))

    def test_unknown_major_version(self, tmp_path, flow):
        """Files from another major version are rejected."""
        cache = FlowCache(tmp_path)
        path = cache.save("c" * 64, flow)
        engine = create_engine(f"sqlite:///{path}")
        meta, _ = create_cache_tables(engine)
        with engine.begin() as conn:
            conn.execute(update(meta).values(schema_version="9.0"))
        engine.dispose()
        with pytest.raises(SchemaVersionError):
            cache.load("c" * 64)


class TestCacheDirectory:
    """Test cache directory resolution."""

    def test_environment_wins(self, monkeypatch, tmp_path):
        """ENTROPYLAB_CACHE overrides the option."""
        monkeypatch.setenv(ENV_CACHE, str(tmp_path))
        assert resolve_cache_dir("elsewhere") == tmp_path

    def test_option(self, monkeypatch):
        """Without the variable the option is used."""
        monkeypatch.delenv(ENV_CACHE, raising=False)
        assert resolve_cache_dir(None) is None
        assert str(resolve_cache_dir("here")) == "here"

    def test_prepare_flow_uses_cache(self, tmp_path):
        """A second preparation loads the cached file."""
        config = RunConfig.model_validate(
            {
                "geometry": {"preset": "sphere(3, 1.0)", "n_cells": 64},
                "flow": {"kind": "round_sphere_exact", "T": 0.1, "n_slices": 4},
            }
        )
        _, first = prepare_flow(config, tmp_path)
        assert len(list(tmp_path.glob("flow-*.sqlite"))) == 1
        _, second = prepare_flow(config, tmp_path)
        np.testing.assert_array_equal(first.warp, second.warp)
