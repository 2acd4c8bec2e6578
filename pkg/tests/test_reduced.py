# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Tests for reduced module.

On static flat space the reduced distance is |x - y|^2 / (4 tau_bar) and the
reduced volume density of a Gaussian measure is the conjugate heat solution
from the same measure; both are checked here.
"""

import math

import numpy as np
import pytest

from entropylab.conjugate_heat import gaussian_terminal, solve_conjugate
from entropylab.exceptions import DomainError, ValidationError
from entropylab.flow import FlowSpec, evolve
from entropylab.geometry import euclidean, round_sphere
from entropylab.reduced import (
    BaseMeasure,
    SpaceTimeCurve,
    action,
    check_w_le_u,
    reduced_distance,
    reduced_distance_upper_report,
    reduced_fields_wrt_measure,
    scalar_lower_bound_violations,
)


@pytest.fixture(scope="module")
def flat_flow():
    return evolve(euclidean(3, 4.0, 256), FlowSpec("static_euclidean", 1.0, n_slices=4))


@pytest.fixture(scope="module")
def sphere_flow():
    return evolve(round_sphere(3, 1.0, 128), FlowSpec("round_sphere_exact", 0.1, n_slices=10))


class TestSpaceTimeCurve:
    """Test curve validation and the action functional."""

    def test_rejects_unsorted_sigma(self):
        """sigma must increase."""
        with pytest.raises(ValidationError):
            SpaceTimeCurve.radial(np.array([0.0, 0.5, 0.2]), np.zeros(3), 1.0)

    def test_rejects_bad_points(self):
        """points must be an (n, 2) finite array."""
        with pytest.raises(ValidationError):
            SpaceTimeCurve(np.array([0.0, 1.0]), np.array([[0.0, 0.0], [np.nan, 0.0]]), 1.0)

    def test_times(self):
        """t = t_ref - sigma^2."""
        curve = SpaceTimeCurve.radial(np.array([0.0, 0.5, 1.0]), np.zeros(3), 1.0)
        np.testing.assert_allclose(curve.times, [1.0, 0.75, 0.0])

    def test_resting_curve_on_flat_space(self, flat_flow):
        """A curve resting at the pole of flat space has zero action."""
        sigma = np.linspace(0.0, 1.0, 33)
        assert action(flat_flow, SpaceTimeCurve.radial(sigma, np.zeros(33), 1.0)) == pytest.approx(0.0, abs=1e-14)

    def test_curve_leaving_grid(self, flat_flow):
        """The action is undefined off the grid."""
        sigma = np.linspace(0.0, 1.0, 5)
        with pytest.raises(DomainError):
            action(flat_flow, SpaceTimeCurve.radial(sigma, np.full(5, 10.0), 1.0))


class TestReducedDistance:
    """Test l against its flat closed form."""

    @pytest.mark.parametrize("y, x", [(0.0, 0.5), (0.5, 1.0), (1.0, 0.2)])
    def test_same_ray(self, flat_flow, y, x):
        """l = (x - y)^2 / (4 tau_bar) for bases on the target's ray."""
        res = reduced_distance(flat_flow, y, (x, 0.5), n_sigma=32, restarts=0)
        assert res.tau_bar == pytest.approx(0.5)
        assert res.l == pytest.approx((x - y) ** 2 / 2.0, rel=1e-3, abs=1e-8)
        assert not res.approximate

    def test_opposite_ray(self, flat_flow):
        """A base on the opposite ray gives l = (x + y)^2 / (4 tau_bar)."""
        res = reduced_distance(flat_flow, (0.4, math.pi), (0.6, 0.5), n_sigma=32, restarts=1)
        assert res.l == pytest.approx(1.0 / 2.0, rel=1e-3)

    def test_off_axis_base_rejected(self, flat_flow):
        """Only angles 0 and pi are supported."""
        with pytest.raises(ValidationError):
            reduced_distance(flat_flow, (0.4, 1.0), (0.6, 0.5))

    def test_target_at_terminal_time(self, flat_flow):
        """The target must lie strictly before T."""
        with pytest.raises(DomainError):
            reduced_distance(flat_flow, 0.0, (0.5, 1.0))

    def test_target_off_grid(self, flat_flow):
        """Positions beyond the grid are rejected."""
        with pytest.raises(DomainError):
            reduced_distance(flat_flow, 0.0, (5.0, 0.5))

    def test_summary(self, flat_flow):
        """The summary carries the optimizer diagnostics."""
        summary = reduced_distance(flat_flow, 0.0, (0.5, 0.5), n_sigma=16, restarts=0).summary()
        assert {"l", "action", "tau_bar", "iterations", "grad_norm", "approximate"} <= set(summary)

    @pytest.mark.slow
    @pytest.mark.parametrize("tau_bar", [0.05, 0.1, 0.25, 0.5, 0.9])
    @pytest.mark.parametrize("x", [0.1, 0.4, 0.8, 1.2, 1.6])
    def test_flat_sweep(self, flat_flow, x, tau_bar):
        """Across distances and tau_bar, l = d^2 / (4 tau_bar) to 1e-3 relative and l + m/2 >= 0."""
        res = reduced_distance(flat_flow, 0.0, (x, 1.0 - tau_bar), n_sigma=32, restarts=0)
        exact = x**2 / (4.0 * tau_bar)
        assert abs(res.l - exact) <= 1e-3 * max(1.0, exact)
        assert res.l + 1.5 >= -1e-6

    @pytest.mark.parametrize("x", [0.2, 0.5])
    def test_short_time_limit_on_sphere(self, sphere_flow, x):
        """As tau_bar -> 0, 4 tau_bar l tends to the squared distance in g(T)."""
        tau_bar = 1e-3 * sphere_flow.T
        res = reduced_distance(sphere_flow, 0.0, (x, sphere_flow.T - tau_bar), n_sigma=32, restarts=1)
        d = float(np.interp(x, sphere_flow.x, sphere_flow.distance_at(sphere_flow.T)))
        assert abs(4.0 * tau_bar * res.l - d**2) <= 5e-2 * d**2


class TestBaseMeasure:
    """Test base probability measures."""

    def test_gaussian_has_unit_mass(self, flat_flow):
        """from_values renormalizes to unit mass."""
        p = BaseMeasure.gaussian(flat_flow, 0.1)
        assert float(p.volumes @ p.density) == pytest.approx(1.0, abs=1e-10)

    def test_rejects_unnormalized(self, flat_flow):
        """The constructor needs unit mass."""
        p = BaseMeasure.gaussian(flat_flow, 0.1)
        with pytest.raises(ValidationError):
            BaseMeasure(p.x, 2.0 * p.density, p.volumes, p.m)

    def test_mix(self, flat_flow):
        """Convex combinations stay probability measures."""
        mixed = BaseMeasure.gaussian(flat_flow, 0.1).mix(BaseMeasure.gaussian(flat_flow, 0.3), 0.25)
        assert float(mixed.volumes @ mixed.density) == pytest.approx(1.0, abs=1e-10)


class TestReducedDensity:
    """Test the reduced volume density against the conjugate heat solution."""

    @pytest.mark.slow
    def test_w_matches_u_on_flat_space(self, flat_flow):
        """For a Gaussian measure on flat space w and u agree up to discretization."""
        tau_T = 0.1
        p = BaseMeasure.gaussian(flat_flow, tau_T)
        _, wfield = reduced_fields_wrt_measure(flat_flow, p, ([0.0, 0.5], [0.5]), n_sigma=32, n_base=12, n_angles=4)
        chs = solve_conjugate(flat_flow, gaussian_terminal(flat_flow, tau_T), steps_per_slice=200)
        report = check_w_le_u(wfield, chs, tol_w=5e-2)
        assert report.passed
        np.testing.assert_allclose(wfield.w, report.u, rtol=0.1)
        assert not wfield.flags.any()
        assert list(wfield.to_frame().columns) == ["x", "t", "l", "w", "flag"]

    @pytest.mark.slow
    def test_w_below_u_on_sphere(self, sphere_flow):
        """On the shrinking sphere w stays below u from the same Gaussian measure and l + m/2 >= 0."""
        tau_T = 0.05
        p = BaseMeasure.gaussian(sphere_flow, tau_T)
        lf, wfield = reduced_fields_wrt_measure(
            sphere_flow, p, ([0.0, 0.3, 0.6], [0.05]), n_sigma=32, n_base=12, n_angles=4
        )
        chs = solve_conjugate(sphere_flow, gaussian_terminal(sphere_flow, tau_T), steps_per_slice=200)
        report = check_w_le_u(wfield, chs, tol_w=5e-2)
        assert report.passed
        assert np.all(lf + 1.5 >= -1e-6)

    def test_terminal_row_is_the_measure(self, flat_flow):
        """At t = T the density is p itself."""
        p = BaseMeasure.gaussian(flat_flow, 0.1)
        _, wfield = reduced_fields_wrt_measure(flat_flow, p, ([0.0, 0.3], [1.0]), n_base=4, n_angles=2)
        np.testing.assert_allclose(wfield.w[0], p(np.array([0.0, 0.3])))

    def test_subgrid_outside_horizon(self, flat_flow):
        """Targets after T are rejected."""
        p = BaseMeasure.gaussian(flat_flow, 0.1)
        with pytest.raises(DomainError):
            reduced_fields_wrt_measure(flat_flow, p, ([0.0], [1.5]))


class TestUpperEstimate:
    """Test the upper estimate on the shrinking sphere."""

    def test_scalar_lower_bound(self, sphere_flow):
        """R > 0 on the sphere, so the lower bound holds with room."""
        assert np.all(scalar_lower_bound_violations(sphere_flow) > 0.0)

    def test_report_passes(self, sphere_flow):
        """l on the estimate's windows is far below log(4m) + F0/2."""
        report = reduced_distance_upper_report(sphere_flow, 10.0, n_sigma=16, samples=2)
        assert report.hypothesis_ok
        assert report.finite
        assert report.passed
        assert report.log_bound == pytest.approx(math.log(12.0) + 0.5 * 1000.0 * 100.0)
