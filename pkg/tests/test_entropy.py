# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Tests for entropy module.

These tests verify the discrete W-functional, the mu and nu solvers, the
curvature sandwich, the exhaustion limit and the symmetrization chain.
"""

import math

import numpy as np
import pytest

from entropylab.entropy import (
    build_grid,
    compute_nu,
    curvature_sandwich,
    dirichlet_comparison,
    entropy_density,
    equimeasurable_rearrangement,
    eval_W,
    exhaustion_series,
    initial_guess,
    minimize_mu,
    normalize,
    nu_sample_grid,
    symmetrization_check,
)
from entropylab.exceptions import DomainError, ValidationError
from entropylab.geometry import RadialDomain, euclidean, round_sphere


@pytest.fixture(scope="module")
def flat():
    return euclidean(3, 2.0, 256)


class TestEntropyDensity:
    """Test the integrand x^2 log x^2."""

    def test_continuous_at_zero(self):
        """0 log 0 is 0 and 1 log 1 is 0."""
        np.testing.assert_array_equal(entropy_density([0.0, 1.0, -1.0]), [0.0, 0.0, 0.0])

    def test_negative_below_one(self):
        """x^2 log x^2 < 0 for 0 < |x| < 1."""
        assert entropy_density([0.5])[0] == pytest.approx(0.25 * math.log(0.25))


class TestTrialFunctions:
    """Test grids, normalization and W evaluation."""

    def test_grid_follows_geometry_spacing(self, flat):
        """Aligned domains reuse the geometry's nodes."""
        grid = build_grid(flat, RadialDomain(0.0, 1.0))
        assert grid.h == pytest.approx(flat.ds)
        assert bool(grid.free[0]) and not bool(grid.free[-1])

    def test_short_domain_rejected(self, flat):
        """Domains below 5 ds cannot be resolved."""
        with pytest.raises(DomainError):
            build_grid(flat, RadialDomain(0.0, 2.0 * flat.ds))

    def test_normalize(self, flat):
        """normalize takes |.|, zeroes walls and gives unit mass."""
        grid = build_grid(flat, RadialDomain(0.0, 1.0))
        phi = normalize(grid, -np.ones(grid.nodes.size))
        assert phi.mass == pytest.approx(1.0)
        assert phi.values[-1] == 0.0
        assert np.all(phi.values >= 0.0)

    def test_zero_function_rejected(self, flat):
        """The zero function cannot be normalized."""
        grid = build_grid(flat, RadialDomain(0.0, 1.0))
        with pytest.raises(ValidationError):
            normalize(grid, np.zeros(grid.nodes.size))

    def test_eval_requires_normalization(self, flat):
        """W is only evaluated on unit-mass functions."""
        grid = build_grid(flat, RadialDomain(0.0, 1.0))
        phi = normalize(grid, np.ones(grid.nodes.size))
        doubled = type(phi)(grid, 2.0 * phi.values)
        with pytest.raises(ValidationError):
            eval_W(flat, "zero", doubled, 1.0)

    def test_eval_constant_term(self, flat):
        """The constant part is -m - (m/2) log(4 pi tau)."""
        grid = build_grid(flat, RadialDomain(0.0, 1.0))
        parts = eval_W(flat, "zero", initial_guess(grid, 1.0), 1.0)
        assert parts.constant == pytest.approx(-3.0 - 1.5 * math.log(4.0 * math.pi))
        assert parts.potential == 0.0
        assert parts.dirichlet > 0.0


class TestMinimizeMu:
    """Test the mu solver."""

    def test_euclidean_unit_ball_positive(self, flat):
        """mu_bar of the Euclidean unit ball at tau = 1 is strictly positive."""
        res = minimize_mu(flat, "zero", RadialDomain(0.0, 1.0), 1.0)
        assert res.converged
        assert res.mu > 0.0
        assert res.residual <= 1e-8
        assert res.minimizer.mass == pytest.approx(1.0, abs=1e-10)

    def test_inclusion_is_strict(self, flat):
        """mu(B(1)) - mu(B(2)) > 0.01 at tau = 1."""
        small = minimize_mu(flat, "zero", RadialDomain(0.0, 1.0), 1.0)
        large = minimize_mu(flat, "zero", RadialDomain(0.0, 2.0), 1.0)
        assert small.mu - large.mu > 0.01

    def test_minimizer_is_decreasing(self, flat):
        """On a ball the minimizer is radially decreasing."""
        res = minimize_mu(flat, "zero", RadialDomain(0.0, 1.0), 0.5)
        assert np.all(np.diff(res.minimizer.values) <= 1e-10)

    def test_minimizer_beats_initial_guess(self, flat):
        """The solver only lowers W."""
        dom = RadialDomain(0.0, 1.0)
        res = minimize_mu(flat, "zero", dom, 0.3)
        start = eval_W(flat, "zero", initial_guess(build_grid(flat, dom), 0.3), 0.3)
        assert res.mu <= start.total

    def test_invalid_tau(self, flat):
        """tau must be positive."""
        with pytest.raises(ValidationError):
            minimize_mu(flat, "zero", RadialDomain(0.0, 1.0), 0.0)

    def test_sphere_sandwich_is_exact_shift(self):
        """With constant R the two variants differ by exactly R tau."""
        geom = round_sphere(3, 1.0, 256)
        tau = 0.02
        mu, mu_bar = curvature_sandwich(geom, RadialDomain(0.0, 0.5), tau)
        assert mu.mu - mu_bar.mu == pytest.approx(6.0 * tau, rel=1e-3)
        assert mu.mu - 6.0 * tau <= mu_bar.mu + 1e-8


class TestComputeNu:
    """Test nu over sampled scales."""

    def test_sample_grid(self):
        """Geometric grid from 1e-3 tau to tau."""
        grid = nu_sample_grid(2.0, 5)
        assert grid[0] == pytest.approx(2e-3)
        assert grid[-1] == pytest.approx(2.0)

    def test_nu_is_min_of_samples(self):
        """nu is the smallest sampled mu and the argmin is one of the samples."""
        geom = euclidean(3, 1.0, 128)
        res = compute_nu(geom, "zero", RadialDomain(0.0, 1.0), 0.5, n_points=5, extra_samples=[0.3])
        assert res.nu == pytest.approx(float(np.min(res.mu_values)))
        assert res.argmin in res.samples.tolist()
        assert 0.3 in res.samples.tolist()
        assert res.samples.size >= 6

    def test_cache_is_reused(self):
        """A cache filled by one call serves the next one without new solves."""
        geom = euclidean(3, 1.0, 128)
        dom = RadialDomain(0.0, 1.0)
        cache = {}
        first = compute_nu(geom, "zero", dom, 0.5, n_points=4, cache=cache)
        solved = dict(cache)
        second = compute_nu(geom, "zero", dom, 0.5, n_points=4, cache=cache)
        assert second.nu == first.nu
        for s, result in solved.items():
            assert cache[s] is result

    def test_threads_give_same_result(self):
        """Thread-pool solves keep the grid order and values."""
        geom = euclidean(3, 1.0, 128)
        dom = RadialDomain(0.0, 1.0)
        serial = compute_nu(geom, "zero", dom, 0.5, n_points=4)
        pooled = compute_nu(geom, "zero", dom, 0.5, n_points=4, jobs=2)
        np.testing.assert_array_equal(serial.mu_values, pooled.mu_values)

    @pytest.mark.slow
    def test_euclidean_nu_vanishes(self):
        """nu of a Euclidean ball is 0 within 5e-2."""
        geom = euclidean(3, 1.0, 400)
        res = compute_nu(geom, "zero", RadialDomain(0.0, 1.0), 1.0, n_points=12)
        assert abs(res.nu) <= 5e-2


class TestExhaustion:
    """Test the exhaustion of R^m by balls."""

    @pytest.mark.slow
    def test_mu_decreases_to_zero(self):
        """mu_bar of balls of radius 2, 4, 8, 16 is positive, decreasing and small at 16."""
        mus = np.array([r.mu for r in exhaustion_series(3, [2.0, 4.0, 8.0, 16.0], 1.0, 0.02)])
        assert np.all(mus > 0.0)
        assert np.all(np.diff(mus) < 0.0)
        assert mus[-1] <= 5e-2


class TestSymmetrization:
    """Test the rearrangement and symmetrization chain."""

    def test_radial_decreasing_is_fixed(self, flat):
        """A decreasing function on a Euclidean ball is its own rearrangement."""
        dom = RadialDomain(0.0, 1.0)
        res = minimize_mu(flat, "zero", dom, 0.5)
        h = equimeasurable_rearrangement(flat, dom, res.minimizer)
        assert h.ball_radius == pytest.approx(1.0, rel=1e-9)
        r = np.linspace(0.0, 0.99, 50)
        np.testing.assert_allclose(h(r), res.minimizer(r), atol=1e-6)
        assert h.l2_mass() == pytest.approx(1.0, rel=1e-6)

    def test_euclidean_chain(self, flat):
        """On a Euclidean ball with lam = 1 the Dirichlet margin vanishes and the chain holds."""
        rep = symmetrization_check(flat, RadialDomain(0.0, 1.0), 0.5, 1.0)
        assert abs(rep.dirichlet_margin) <= 1e-4
        assert rep.margin >= -1e-6

    def test_dirichlet_comparison_scales_with_lambda(self, flat):
        """Shrinking lambda leaves a positive Dirichlet margin; lambda must be positive."""
        dom = RadialDomain(0.0, 1.0)
        res = minimize_mu(flat, "zero", dom, 0.5)
        h = equimeasurable_rearrangement(flat, dom, res.minimizer)
        assert dirichlet_comparison(flat, res.minimizer, h, 0.5) > 0.0
        with pytest.raises(ValidationError):
            dirichlet_comparison(flat, res.minimizer, h, 0.0)

    def test_foreign_function_rejected(self, flat):
        """The rearranged function must live on the given domain."""
        res = minimize_mu(flat, "zero", RadialDomain(0.0, 1.0), 0.5)
        with pytest.raises(ValidationError):
            equimeasurable_rearrangement(flat, RadialDomain(0.0, 2.0), res.minimizer)
