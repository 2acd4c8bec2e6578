# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Tests for flow module.

These tests verify the closed-form flows, the numerical warped flow against
the exact shrinking sphere, and the curvature and distance reports.
"""

import math

import numpy as np
import pytest

from entropylab.exceptions import ConfigurationError, DomainError, HorizonTruncatedError, ValidationError
from entropylab.flow import (
    FlowSpec,
    check_distance_evolution,
    check_flow_hypothesis,
    evolve,
    rmin_nondecreasing,
    scalar_curvature_floor,
    sphere_extinction_time,
    sphere_radius_squared,
)
from entropylab.geometry import RadialGeometry, euclidean, round_sphere


@pytest.fixture(scope="module")
def sphere_flow():
    return evolve(round_sphere(3, 1.0, 128), FlowSpec("round_sphere_exact", 0.1, n_slices=10))


class TestFlowSpec:
    """Test flow specification validation."""

    def test_defaults(self):
        """k = 1, lam = 0 and 20 slices by default."""
        spec = FlowSpec("static_euclidean", 1.0)
        assert spec.k == 1.0
        assert spec.lam == 0.0
        assert spec.n_slices == 20

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"kind": "mean_curvature", "T": 1.0},
            {"kind": "static_euclidean", "T": 0.0},
            {"kind": "static_euclidean", "T": 1.0, "k": 3.0},
            {"kind": "static_euclidean", "T": 1.0, "lam": 2.0},
        ],
    )
    def test_invalid(self, kwargs):
        """Unknown kinds and out-of-range parameters are rejected."""
        with pytest.raises(ValidationError):
            FlowSpec(**kwargs)


class TestExactSphere:
    """Test the closed-form shrinking sphere."""

    def test_extinction_time(self):
        """a0^2 / (2(m-1)) without normalization."""
        assert sphere_extinction_time(3, 1.0) == pytest.approx(0.25)
        assert sphere_extinction_time(4, 2.0) == pytest.approx(4.0 / 6.0)

    def test_rescaled_radius_starts_at_a0(self):
        """The rescaled radius formula is continuous at t = 0."""
        assert float(sphere_radius_squared(3, 1.3, 0.0, k=1.5, lam=0.5)) == pytest.approx(1.69)

    def test_negative_lam_delays_extinction(self):
        """The +g normalization term slows the shrinking: extinction at log(4/3)."""
        assert sphere_extinction_time(3, 1.0, k=1.0, lam=-1.0) == pytest.approx(math.log(4.0 / 3.0))

    def test_positive_lam_hastens_extinction(self):
        """The -g normalization term speeds up the shrinking: extinction at log(5/4)."""
        assert sphere_extinction_time(3, 1.0, k=1.0, lam=1.0) == pytest.approx(math.log(1.25))

    def test_radius(self, sphere_flow):
        """a(t)^2 = a0^2 - 2(m-1)t."""
        assert float(sphere_flow.radius_at(0.1)) == pytest.approx(math.sqrt(0.6))
        assert sphere_flow.T == pytest.approx(0.1)
        assert sphere_flow.n_slices == 11
        assert sphere_flow.is_exact

    def test_scalar_curvature(self, sphere_flow):
        """R = m(m-1)/a(t)^2 on every slice."""
        R = sphere_flow.fields_at(0.1).R
        np.testing.assert_allclose(R, 6.0 / 0.6)

    def test_geometry_at_matches_radius(self, sphere_flow):
        """Resampled slices are round spheres of radius a(t)."""
        geom = sphere_flow.geometry_at(sphere_flow.n_slices - 1)
        assert geom.s_max == pytest.approx(math.pi * math.sqrt(0.6))
        assert geom.is_sphere

    def test_distance_scales(self, sphere_flow):
        """Distances shrink by a(t)/a0."""
        d = sphere_flow.distance_at(0.1, "north")
        assert d[-1] == pytest.approx(math.pi * math.sqrt(0.6), rel=1e-6)

    def test_past_extinction(self):
        """A horizon past extinction is truncated."""
        with pytest.raises(HorizonTruncatedError):
            evolve(round_sphere(3, 1.0, 64), FlowSpec("round_sphere_exact", 0.3))

    def test_time_outside_horizon(self, sphere_flow):
        """Fields are only defined on [0, T]."""
        with pytest.raises(DomainError):
            sphere_flow.fields_at(0.2)

    def test_rmin_nondecreasing(self, sphere_flow):
        """min R increases as the sphere shrinks."""
        floor = scalar_curvature_floor(sphere_flow)
        assert floor[0] == pytest.approx(6.0)
        assert rmin_nondecreasing(sphere_flow)


class TestStaticEuclidean:
    """Test the static flat flow."""

    def test_static_slices(self):
        """Every slice equals the initial flat geometry."""
        flow = evolve(euclidean(3, 2.0, 64), FlowSpec("static_euclidean", 1.0, n_slices=4))
        assert flow.n_slices == 5
        np.testing.assert_array_equal(flow.warp[0], flow.warp[-1])
        assert np.all(flow.curvatures[2].R == 0.0)

    def test_needs_flat_geometry(self):
        """A curved geometry cannot be a static flat flow."""
        with pytest.raises(ConfigurationError):
            evolve(round_sphere(3, 1.0, 64), FlowSpec("static_euclidean", 0.1))


class TestNumericalFlow:
    """Test the numerical warped-product flow."""

    @pytest.mark.slow
    def test_matches_exact_sphere(self):
        """The numerical flow of a round sphere tracks the exact radius."""
        geom = round_sphere(3, 1.0, 64)
        flow = evolve(geom, FlowSpec("numerical_warped", 0.02, dt=1e-4, n_slices=4))
        assert flow.provenance["source"] == "numerical"
        mid = flow.x.size // 2
        R = flow.fields_at(0.02).R[mid]
        assert R == pytest.approx(6.0 / (1.0 - 4.0 * 0.02), rel=2e-2)
        dist = flow.distance_at(0.02, "north")[-1]
        assert dist == pytest.approx(math.pi * math.sqrt(1.0 - 4.0 * 0.02), rel=1e-2)

    def test_disk_boundary_is_frozen(self):
        """On a disk the warp at the outer node keeps its initial value while the interior moves."""
        s = np.linspace(0.0, 1.0, 65)
        cap = RadialGeometry(3, "disk", s, np.sin(s))
        flow = evolve(cap, FlowSpec("numerical_warped", 0.01, dt=1e-4, n_slices=2))
        np.testing.assert_array_equal(flow.warp[:, -1], np.sin(1.0))
        mid = s.size // 2
        assert flow.warp[-1, mid] < flow.warp[0, mid]


class TestHypothesisReports:
    """Test the curvature hypothesis and the distance evolution report."""

    def test_hypothesis_holds_for_large_A(self, sphere_flow):
        """t |Rc| <= (m-1) A on the shrinking sphere for A = 3000."""
        rep = check_flow_hypothesis(sphere_flow, "north", 3000.0)
        assert rep.passed
        assert rep.sup == pytest.approx(0.1 * 2.0 / 0.6, rel=1e-6)

    def test_hypothesis_fails_for_small_A(self, sphere_flow):
        """A tiny A violates the bound at late times."""
        rep = check_flow_hypothesis(sphere_flow, "north", 0.01)
        assert not rep.passed
        assert bool(rep.slice_passed[0])

    def test_distance_evolution(self, sphere_flow):
        """(d/dt - Delta)(d + 2A sqrt t) >= 0 away from the parabolic ball."""
        rep = check_distance_evolution(sphere_flow, "north", 3000.0)
        assert rep.passed
        assert np.isfinite(rep.min_margin)
