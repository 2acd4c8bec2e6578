# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Integration tests for the command-line interface.
"""

import json

import pytest
from click.testing import CliRunner

from entropylab.cli import cli

pytestmark = pytest.mark.integration


def write_config(tmp_path, checks, **overrides):
    config = {
        "geometry": {"preset": "euclidean(3, 2.0)", "n_cells": 128},
        "flow": {"kind": "static_euclidean", "T": 0.5, "n_slices": 4},
        "output_dir": str(tmp_path / "out"),
        "cache": {"enabled": False},
        "checks": checks,
        **overrides,
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(config))
    return path


@pytest.fixture
def runner():
    return CliRunner()


class TestVerifyCommand:
    """Test the verify command's exit status and artifacts."""

    def test_passing_suite(self, runner, tmp_path):
        """A passing suite exits 0 and writes the report."""
        path = write_config(tmp_path, [{"id": "cutoff", "params": {"A_values": [36]}}])
        result = runner.invoke(cli, ["verify", "-c", str(path)])
        assert result.exit_code == 0, result.output
        assert "PASS" in result.output
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["checks"]
        assert (tmp_path / "out" / "checks.csv").exists()

    def test_control_exits_nonzero(self, runner, tmp_path):
        """Enabled controls fail the run."""
        path = write_config(tmp_path, [{"id": "control/cutoff", "params": {"A_values": [36], "F0": 1.0}}])
        result = runner.invoke(cli, ["verify", "-c", str(path), "--format", "json"])
        assert result.exit_code == 1
        assert json.loads(result.output)["checks"][0]["control"]

    def test_bad_config(self, runner, tmp_path):
        """Config errors are reported on stderr with status 1."""
        path = write_config(tmp_path, [{"id": "no-such-check"}])
        result = runner.invoke(cli, ["verify", "-c", str(path)])
        assert result.exit_code == 1
        assert "Error:" in result.output


class TestOtherCommands:
    """Test the per-module commands."""

    def test_schema(self, runner):
        """schema prints both JSON schemas."""
        result = runner.invoke(cli, ["schema"])
        assert result.exit_code == 0
        assert set(json.loads(result.output)) == {"config", "report"}

    def test_flow(self, runner, tmp_path):
        """flow writes per-slice tables and prints provenance."""
        path = write_config(tmp_path, [])
        result = runner.invoke(cli, ["flow", "-c", str(path)])
        assert result.exit_code == 0, result.output
        assert json.loads(result.output)["kind"] == "static_euclidean"
        assert (tmp_path / "out" / "flow_slices.csv").exists()

    def test_entropy(self, runner, tmp_path):
        """entropy writes the minimizer and, with --nu, the sample table."""
        path = write_config(tmp_path, [], solver={"nu_points": 4})
        result = runner.invoke(cli, ["entropy", "-c", str(path), "--tau", "0.5", "--radius", "1.0", "--nu"])
        assert result.exit_code == 0, result.output
        assert "mu = " in result.output
        for name in ("minimizer.csv", "nu_samples.csv", "mu_vs_s.json", "entropy.json"):
            assert (tmp_path / "out" / name).exists()

    def test_cutoff(self, runner, tmp_path):
        """cutoff certifies and tabulates both cutoffs."""
        path = write_config(tmp_path, [])
        result = runner.invoke(cli, ["cutoff", "-c", str(path), "--A", "36"])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "out" / "cutoff_unbounded_36.csv").exists()

    def test_harnack_gaussian(self, runner, tmp_path):
        """harnack with Gaussian terminal data on flat space."""
        path = write_config(tmp_path, [])
        result = runner.invoke(cli, ["harnack", "-c", str(path), "--tau-T", "0.1", "--terminal", "gaussian"])
        assert result.exit_code == 0, result.output
        margins = json.loads(result.output)
        assert margins["mass_drift"] < 1e-6

    def test_out_override(self, runner, tmp_path):
        """--out replaces the configured output directory."""
        path = write_config(tmp_path, [])
        target = tmp_path / "elsewhere"
        result = runner.invoke(cli, ["cutoff", "-c", str(path), "--A", "100", "-o", str(target)])
        assert result.exit_code == 0, result.output
        assert (target / "cutoff.json").exists()

    @pytest.mark.slow
    def test_reduced(self, runner, tmp_path):
        """reduced writes the density fields against a Gaussian base measure."""
        path = write_config(tmp_path, [], solver={"n_sigma": 16})
        args = ["reduced", "-c", str(path), "--tau-T", "0.1", "--targets", "3", "--times", "1", "--n-base", "4", "--n-angles", "2"]
        result = runner.invoke(cli, args)
        assert result.exit_code == 0, result.output
        assert "flagged" in json.loads(result.output)
        assert (tmp_path / "out" / "reduced_fields.csv").exists()


class TestModuleHeader:
    """Test module-level conventions shared with the library modules."""

    def test_postponed_annotations(self):
        """cli evaluates annotations lazily like every other module."""
        import __future__

        import entropylab.cli as cli_module

        assert cli_module.annotations is __future__.annotations
