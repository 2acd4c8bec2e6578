# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Tests for verify module.

These tests verify result orientation and classification, a sample of the
single-geometry and flow checks, the falsification controls, and suite
orchestration from a RunConfig.
"""

import math

import pytest

from entropylab.exceptions import ConfigurationError
from entropylab.exports import report_content_hash
from entropylab.flow import FlowSpec, evolve
from entropylab.geometry import GeodesicBall, RadialDomain, euclidean, round_sphere
from entropylab.models import CheckConfig, RunConfig, Tolerances
from entropylab.verify import (
    NuTable,
    SuiteContext,
    aligned_domain,
    check_almost_monotonicity,
    check_cutoffs,
    check_effective_monotonicity,
    check_effective_nu,
    check_flow_hypothesis_bound,
    check_harnack_suite,
    check_improved_nlc,
    check_inclusion,
    check_local_nlc,
    check_nu_nonpositive,
    check_nu_propagation,
    check_reduced_estimate,
    check_sandwich,
    check_tau_scaling,
    check_volume_propagation,
    check_volume_ratio_equiv,
    check_volume_ratio_lower,
    classify,
    family_of,
    improved_nlc_log_kappa,
    inputs_digest,
    make_result,
    run_check,
    run_suite,
    skipped_result,
)


def euclid_config(checks):
    return RunConfig.model_validate(
        {
            "geometry": {"preset": "euclidean(3, 4.0)", "n_cells": 128},
            "flow": {"kind": "static_euclidean", "T": 1.0, "n_slices": 4},
            "cache": {"enabled": False},
            "checks": checks,
        }
    )


@pytest.fixture(scope="module")
def flat():
    return euclidean(3, 2.0, 256)


@pytest.fixture(scope="module")
def static_flow():
    return evolve(euclidean(3, 4.0, 128), FlowSpec("static_euclidean", 1.0, n_slices=4))


@pytest.fixture(scope="module")
def sphere_flow():
    return evolve(round_sphere(3, 1.0, 256), FlowSpec("round_sphere_exact", 0.1, n_slices=4))


def assert_active_and_passing(results):
    for r in results:
        assert not r.skipped, r.metadata.get("skip_reason")
        assert math.isfinite(r.lhs) and math.isfinite(r.rhs)
        assert r.passed, r.id


class TestResults:
    """Test result orientation and slackness classes."""

    def test_orientation(self):
        """margin = rhs - lhs and passed iff margin >= -tol."""
        r = make_result("inclusion/strict", 1.0, 1.5, 1e-6, "d")
        assert r.margin == pytest.approx(0.5)
        assert r.passed
        assert not make_result("inclusion/strict", 1.5, 1.0, 1e-6, "d").passed

    def test_within_tolerance(self):
        """A violation smaller than tol still passes and is tight."""
        r = make_result("sandwich/upper-curvature", 1.0 + 1e-7, 1.0, 1e-6, "d")
        assert r.passed
        assert r.slackness == "tight"

    def test_non_finite_side_fails(self):
        """A non-finite side is a failure without a margin."""
        r = make_result("inclusion/strict", math.nan, 1.0, 1e-6, "d")
        assert not r.passed
        assert r.margin is None
        assert r.lhs is None

    def test_classify(self):
        """Families with huge constants are astronomical regardless of margin."""
        assert classify("nlc/local@0.1", 1e-9, 1e-6) == "astronomical"
        assert classify("control/volume-ratio/lower", 1e-9, 1e-6) == "astronomical"
        assert classify("inclusion/strict", 5e-6, 1e-6) == "tight"
        assert classify("inclusion/strict", 1.0, 1e-6) == "moderate"

    def test_family_of(self):
        """The control prefix and the case suffix are dropped."""
        assert family_of("control/cutoff/unbounded@36") == "cutoff/unbounded"

    def test_as_control(self):
        """Controls are relabelled once."""
        r = make_result("cutoff/unbounded", 0.0, -1.0, 0.0, "d").as_control()
        assert r.id == "control/cutoff/unbounded"
        assert r.control
        assert r.as_control().id == r.id

    def test_skipped_record(self):
        """Skipped results carry their reason."""
        rec = skipped_result("flow/distance-evolution", "nothing to check", "d").to_record()
        assert rec.skipped
        assert rec.metadata["skip_reason"] == "nothing to check"

    def test_digest_is_stable(self):
        """Equal inputs give equal digests irrespective of keyword order."""
        assert inputs_digest("x", a=1.0, b=[1, 2]) == inputs_digest("x", b=[1, 2], a=1.0)
        assert inputs_digest("x", a=1.0) != inputs_digest("x", a=2.0)

    def test_records_are_json_safe(self):
        """Non-finite metadata becomes None."""
        rec = make_result("inclusion/strict", 0.0, 1.0, 0.0, "d", metadata={"v": math.inf}).to_record()
        assert rec.metadata["v"] is None


class TestHelpers:
    """Test aligned domains and the nu table."""

    def test_aligned_domain_on_nodes(self, flat):
        """Both ends land on grid nodes."""
        dom = aligned_domain(flat, GeodesicBall("north", 1.003))
        assert dom.s_hi / flat.ds == pytest.approx(round(dom.s_hi / flat.ds), abs=1e-9)

    def test_nu_table_is_monotone(self):
        """nu over nested sample sets is nonincreasing in tau."""
        geom = euclidean(3, 1.0, 128)
        table = NuTable(geom, "zero", RadialDomain(0.0, 1.0), n_points=4)
        small = table.nu(0.1)
        large = table.nu(0.5)
        assert large <= small

    def test_improved_kappa_is_finite(self):
        """The improved constant is a finite log."""
        assert math.isfinite(improved_nlc_log_kappa(3, 10.0))


class TestSingleGeometryChecks:
    """Test checks on a fixed geometry."""

    def test_inclusion(self, flat):
        """Nested Euclidean balls have strictly ordered mu."""
        results = check_inclusion(flat, "north", [1.0, 2.0], 1.0, min_gap=0.01)
        assert len(results) == 1
        assert results[0].id == "inclusion/strict@1-2"
        assert results[0].passed

    def test_sandwich_on_sphere(self):
        """Both curvature sandwich inequalities hold on a round sphere."""
        results = check_sandwich(round_sphere(3, 1.0, 256), GeodesicBall("north", 0.5), 0.02)
        assert all(r.passed for r in results)

    def test_tau_scaling(self):
        """nu is monotone and its growth is bounded by (m/2) log(tau2/tau1)."""
        results = check_tau_scaling(euclidean(3, 1.0, 128), RadialDomain(0.0, 1.0), 0.05, 0.2, n_points=4)
        assert len(results) == 4
        assert all(r.passed for r in results)

    def test_nu_nonpositive(self):
        """nu <= 0 up to discretization."""
        results = check_nu_nonpositive(euclidean(3, 1.0, 128), GeodesicBall("north", 1.0), 0.5, n_points=6)
        assert all(r.passed for r in results)

    def test_volume_ratio_lower(self):
        """On flat space the ratio is 1 and both lower bounds hold."""
        results = check_volume_ratio_lower(euclidean(3, 4.0, 128), GeodesicBall("north", 1.0), n_points=4)
        assert [r.id for r in results] == ["volume-ratio/lower", "volume-ratio/lower-nu"]
        assert all(r.passed for r in results)
        assert all(r.slackness == "astronomical" for r in results)

    def test_volume_ratio_lower_compares_with_log_ratio(self):
        """Both lower bounds are measured against the log volume ratio, with the curvature term on nu."""
        results = check_volume_ratio_lower(round_sphere(3, 1.0, 128), GeodesicBall("north", 0.5), n_points=4)
        lower, lower_nu = results
        meta = lower_nu.metadata
        assert meta["lam_upper"] > 0.0
        assert lower.rhs == pytest.approx(meta["log_ratio"])
        assert lower_nu.rhs == pytest.approx(meta["log_ratio"])
        assert lower_nu.lhs == pytest.approx(meta["nu"] - 2.0**10 - meta["lam_upper"] * 0.25)
        assert lower_nu.passed

    def test_volume_ratio_equiv(self):
        """The two-sided volume ratio bounds hold on a flat ball with room for B(5 r0)."""
        results = check_volume_ratio_equiv(euclidean(3, 6.0, 128), GeodesicBall("north", 1.0), n_points=4)
        assert len(results) == 4
        assert all(r.passed for r in results)

    def test_volume_ratio_equiv_skips_small_disk(self):
        """Without room for the 5 r0 ball the check is skipped."""
        results = check_volume_ratio_equiv(euclidean(3, 4.0, 128), GeodesicBall("north", 1.0), n_points=4)
        assert len(results) == 1
        assert results[0].skipped

    def test_volume_ratio_equiv_fabricated_nu(self):
        """A fabricated, very negative nu_bar violates the lower bound."""
        results = check_volume_ratio_equiv(
            euclidean(3, 6.0, 128), GeodesicBall("north", 1.0), n_points=4, nu_bar_override=-1e6
        )
        assert len(results) == 1
        assert not results[0].passed


class TestCutoffChecks:
    """Test the cutoff family and its control."""

    def test_certified(self):
        """Both cutoffs and the coefficient bound certify."""
        results = check_cutoffs([36.0, 3000.0])
        assert all(r.passed for r in results)
        assert {r.id for r in results} >= {"cutoff/bounded", "cutoff/coefficients@36", "cutoff/unbounded@3000"}

    def test_control_fails(self):
        """The control with F0 = 1 and the smoothstep fails every check."""
        results = check_cutoffs([36.0], control=True, F0_control=1.0)
        assert results
        assert not any(r.passed for r in results)


class TestFlowChecks:
    """Test checks on a flow."""

    def test_flow_hypothesis(self):
        """The shrinking sphere satisfies the curvature hypothesis for A = 3000."""
        flow = evolve(round_sphere(3, 1.0, 64), FlowSpec("round_sphere_exact", 0.1, n_slices=4))
        result = check_flow_hypothesis_bound(flow, "north", 3000.0)
        assert result.passed
        assert result.id == "flow/hypothesis"

    def test_gates_skip_small_A(self, static_flow):
        """Checks that need A > 1000 m are skipped below it."""
        tolerances = Tolerances()
        almost = check_almost_monotonicity(static_flow, "north", 10.0, 0.1, tolerances)
        assert [r.id for r in almost] == ["monotonicity/almost", "monotonicity/mass-retention"]
        assert all(r.skipped for r in almost)
        assert check_local_nlc(static_flow, "north", 10.0, "north", 0.5).skipped
        chain = check_nu_propagation(static_flow, "north", "north", 0.5, 10.0, tolerances)
        assert len(chain) == 5
        assert all(r.skipped and "1000 m" in r.metadata["skip_reason"] for r in chain)

    def test_volume_propagation_flat(self, static_flow):
        """On static flat space both volume propagation bounds hold."""
        results = check_volume_propagation(static_flow, "north", "north", 0.5, 3001.0)
        assert [r.id for r in results] == ["propagation/volume-final", "propagation/ricci-flat-volume"]
        assert all(r.passed for r in results)
        assert results[0].metadata["rho_c"] == pytest.approx(1.0, rel=1e-3)

    @pytest.mark.slow
    def test_harnack_suite_gaussian(self):
        """Gaussian terminal data on flat space produces every Harnack record."""
        flow = evolve(euclidean(3, 4.0, 256), FlowSpec("static_euclidean", 0.5, n_slices=4))
        results = check_harnack_suite(flow, None, 0.1, Tolerances(tol_v=0.1), terminal="gaussian", steps_per_slice=200)
        assert [r.id for r in results] == ["harnack/v-equality", "harnack/differential", "harnack/integrated"]
        assert results[0].passed
        assert all(r.margin is not None for r in results)

    @pytest.mark.slow
    def test_effective_monotonicity_whole_sphere(self):
        """A ball past the diameter is the whole sphere, and the bound reduces to mu0 <= mu_T."""
        flow = evolve(round_sphere(3, 1.0, 128), FlowSpec("round_sphere_exact", 0.05, n_slices=4))
        results = check_effective_monotonicity(flow, "north", 10.0, None, 0.05, Tolerances(), tol=1e-3)
        assert [r.id for r in results] == ["monotonicity/effective-mu", "monotonicity/effective-mu-sharp"]
        assert results[0].metadata["whole"]
        assert results[0].rhs == 0.0
        assert all(r.passed for r in results)

    @pytest.mark.slow
    def test_effective_nu_whole_sphere(self):
        """On the whole sphere the retained mass c_u is the conserved total mass."""
        flow = evolve(round_sphere(3, 1.0, 128), FlowSpec("round_sphere_exact", 0.05, n_slices=4))
        results = check_effective_nu(flow, "north", 10.0, None, 0.05, Tolerances(), n_lambda=2, n_points=4)
        assert [r.id for r in results] == ["monotonicity/effective-nu"]
        assert results[0].metadata["c_u"] == pytest.approx(1.0, rel=1e-5)
        assert results[0].metadata["C_h"] == 0.0

    @pytest.mark.slow
    def test_local_nlc_on_sphere(self, sphere_flow):
        """Past the gates the local kappa bound holds with finite logs."""
        result = check_local_nlc(sphere_flow, "north", 3000.0, "north", 0.1, n_tau=3)
        assert_active_and_passing([result])
        assert result.log_space
        assert result.metadata["approximate"]

    def test_improved_nlc_on_sphere(self, sphere_flow):
        """The bounded-geometry hypotheses hold for r0 = 0.4 and the volume bound follows."""
        result = check_improved_nlc(sphere_flow, "north", 0.4, "north", 0.1, 10.0)
        assert_active_and_passing([result])
        assert result.lhs == pytest.approx(improved_nlc_log_kappa(3, 10.0))
        assert 0.0 < 0.4**2 * result.metadata["sup_rm"] <= 1.0 / 3.0

    def test_reduced_estimate_on_sphere(self, sphere_flow):
        """The upper estimate for l is evaluated and holds."""
        result = check_reduced_estimate(sphere_flow, "north", 3000.0, n_sigma=16, samples=2)
        assert_active_and_passing([result])
        assert result.metadata["max_l"] > 0.0

    @pytest.mark.slow
    def test_nu_propagation_on_sphere(self, sphere_flow):
        """Every link of the propagation chain is computed and holds on the shrinking sphere."""
        results = check_nu_propagation(
            sphere_flow,
            "north",
            "north",
            0.1,
            3500.0,
            Tolerances(tol_w=5e-2),
            n_lambda=2,
            n_points=8,
            n_sigma=16,
            n_base=6,
            n_angles=2,
            n_targets=3,
        )
        assert [r.id for r in results] == [
            "propagation/nu-ordering",
            "propagation/nu-effective",
            "propagation/c-u-bound",
            "propagation/nu-intermediate",
            "propagation/nu-final",
        ]
        assert_active_and_passing(results)
        assert all(r.log_space for r in results[3:])


class TestSuite:
    """Test suite orchestration."""

    def test_unknown_check(self):
        """Unknown ids are configuration errors."""
        with pytest.raises(ConfigurationError):
            run_suite(euclid_config([{"id": "no-such-check"}]))

    def test_uncontrollable_control(self):
        """Only some families have a falsification control."""
        with pytest.raises(ConfigurationError):
            run_suite(euclid_config([{"id": "control/inclusion"}]))

    def test_domain_error_becomes_skip(self):
        """Families whose domain does not exist are skipped, not failed."""
        config = euclid_config([{"id": "global-monotonicity", "params": {"tau_T": 0.5}}])
        report = run_suite(config)
        assert report.results
        assert all(r.skipped for r in report.results)
        assert report.all_passed()

    def test_small_suite(self):
        """A cheap flat suite passes end to end and records provenance."""
        config = euclid_config(
            [
                {"id": "inclusion", "params": {"center": "north", "radii": [1.0, 2.0], "tau": 1.0, "min_gap": 0.01}},
                {"id": "cutoff", "params": {"A_values": [36]}},
            ]
        )
        report = run_suite(config)
        assert report.all_passed()
        assert report.flow_provenance["kind"] == "static_euclidean"
        assert report.config_hash == config.config_hash()
        model = report.to_model(artifacts=["report.json"])
        assert model.artifacts == ["report.json"]
        assert "numpy" in report.versions

    def test_only_filter(self):
        """only restricts the run to the named families."""
        config = euclid_config(
            [
                {"id": "inclusion", "params": {"center": "north", "radii": [1.0, 2.0], "tau": 1.0}},
                {"id": "cutoff", "params": {"A_values": [36]}},
            ]
        )
        report = run_suite(config, only=["cutoff"])
        assert all(r.id.startswith("cutoff/") for r in report.results)

    def test_threads_keep_order(self):
        """jobs > 1 keeps the declared order and the values."""
        checks = [
            {"id": "cutoff", "params": {"A_values": [36]}},
            {"id": "inclusion", "params": {"center": "north", "radii": [1.0, 2.0], "tau": 1.0}},
        ]
        serial = run_suite(euclid_config(checks))
        pooled = run_suite(euclid_config(checks), jobs=2)
        assert [r.id for r in serial.results] == [r.id for r in pooled.results]
        assert [r.margin for r in serial.results] == [r.margin for r in pooled.results]

    def test_reruns_are_identical(self):
        """Two runs of one config give the same report content hash."""
        checks = [
            {"id": "inclusion", "params": {"center": "north", "radii": [1.0, 2.0], "tau": 1.0}},
            {"id": "volume-ratio-lower", "params": {"ball": {"center": "north", "radius": 0.5}}},
            {"id": "cutoff", "params": {"A_values": [36]}},
        ]
        first = run_suite(euclid_config(checks)).to_model(timings={"total": 1.0})
        second = run_suite(euclid_config(checks)).to_model(timings={"total": 2.0})
        assert report_content_hash(first) == report_content_hash(second)

    def test_control_fails_suite(self):
        """An enabled control makes the suite fail even when its checks fail as intended."""
        config = euclid_config([{"id": "control/cutoff", "params": {"A_values": [36], "F0": 1.0}}])
        report = run_suite(config)
        assert all(r.control for r in report.results)
        assert not report.all_passed()

    def test_run_check_directly(self):
        """run_check applies the control relabelling."""
        config = euclid_config([])
        geom = euclidean(3, 4.0, 128)
        flow = evolve(geom, FlowSpec("static_euclidean", 1.0, n_slices=4))
        ctx = SuiteContext(config, geom, flow)
        results = run_check(ctx, CheckConfig(id="control/cutoff", params={"A_values": [36], "F0": 1.0}))
        assert all(r.id.startswith("control/cutoff/") for r in results)
