# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Tests for cutoff module.

These tests verify the defining properties of both cutoffs, the
certification margins and the failing textbook families.
"""

import numpy as np
import pytest

from entropylab.cutoff import (
    bounded_cutoff_values,
    interpolation_coefficients,
    make_bounded_cutoff,
    make_unbounded_cutoff,
    verify_psi_inequality,
)
from entropylab.exceptions import ConstructionError, DomainError

A_VALUES = [36.0, 100.0, 3000.0, 1e6]


class TestBoundedCutoff:
    """Test the bounded cutoff on [0, 3]."""

    def test_plateaus(self):
        """psi = 1 on [0, 1] and psi = 0 on [2, 3]."""
        psi, dpsi, _ = bounded_cutoff_values(np.array([0.0, 0.5, 1.0, 2.0, 2.5, 3.0]))
        np.testing.assert_allclose(psi[:3], 1.0)
        np.testing.assert_allclose(psi[3:], 0.0, atol=1e-12)
        np.testing.assert_allclose(dpsi[[0, 1, 4, 5]], 0.0, atol=1e-12)

    def test_certified_margins(self):
        """All four properties hold with nonnegative margins on 10^4 + 1 points."""
        cut = make_bounded_cutoff()
        assert cut.s.size == 10_001
        assert set(cut.margins) == {"second_derivative", "gradient_square", "slope_range", "value_range"}
        assert min(cut.margins.values()) >= 0.0

    def test_monotone(self):
        """psi is nonincreasing."""
        cut = make_bounded_cutoff()
        assert np.all(cut.dpsi <= 0.0)
        assert np.all(np.diff(cut.psi) <= 1e-15)

    def test_smoothstep_fails_certification(self):
        """The quintic smoothstep violates (psi')^2 <= 10 psi near its end."""
        with pytest.raises(ConstructionError) as exc:
            make_bounded_cutoff("quintic-smoothstep")
        assert exc.value.margins["gradient_square"] < 0.0

    def test_smoothstep_violation_point(self):
        """At s = 1.7 the smoothstep has (psi')^2 near 1.750 against 10 psi near 1.631."""
        psi, dpsi, _ = bounded_cutoff_values(np.array([1.7]), "quintic-smoothstep")
        assert dpsi[0] ** 2 == pytest.approx(1.750, abs=1e-3)
        assert 10.0 * psi[0] == pytest.approx(1.631, abs=1e-3)
        squared, dsquared, _ = bounded_cutoff_values(np.array([1.7]))
        assert dsquared[0] ** 2 <= 10.0 * squared[0]

    def test_frame_export(self):
        """The cutoff tabulates as (s, psi, dpsi, ddpsi)."""
        frame = make_bounded_cutoff(n_points=101).to_frame()
        assert list(frame.columns) == ["s", "psi", "dpsi", "ddpsi"]
        assert len(frame) == 101


class TestInterpolationCoefficients:
    """Test the cubic-in-theta interpolation coefficients."""

    @pytest.mark.parametrize("A", A_VALUES)
    def test_bounded_by_950(self, A):
        """|c1| + |c2| + |c3| < 950 for every A in the tested set."""
        c1, c2, c3 = interpolation_coefficients(np.sqrt(A))
        assert abs(c1) + abs(c2) + abs(c3) < 950.0

    def test_requires_k_above_two(self):
        """k <= 2 is outside the construction."""
        with pytest.raises(DomainError):
            interpolation_coefficients(2.0)


class TestUnboundedCutoff:
    """Test the unbounded cutoff and its certificate."""

    @pytest.mark.parametrize("A", A_VALUES)
    def test_certified_with_large_F0(self, A):
        """The differential inequality holds with F0 = 1000 A^2."""
        cert = verify_psi_inequality(make_unbounded_cutoff(A), 1000.0 * A * A)
        assert cert.passed
        assert cert.min_margin >= 0.0

    @pytest.mark.parametrize("A", [36.0, 3000.0])
    def test_small_F0_fails(self, A):
        """F0 = 1 is too small: the certificate fails."""
        cert = verify_psi_inequality(make_unbounded_cutoff(A), 1.0)
        assert not cert.passed

    @pytest.mark.parametrize("A", A_VALUES)
    def test_joins_are_smooth(self, A):
        """Value, slope and curvature match at the join with the rational piece."""
        cert = verify_psi_inequality(make_unbounded_cutoff(A), 1000.0 * A * A)
        assert max(cert.join_errors.values()) < 1e-6

    def test_values(self):
        """psi = 1 far left, psi = 2 at s1 and psi grows toward 0.2."""
        cut = make_unbounded_cutoff(100.0)
        assert cut.log_psi(np.array([-1.0]))[0] == 0.0
        assert cut(np.array([cut.s1]))[0] == pytest.approx(2.0, rel=1e-9)
        s = np.linspace(cut.s0, 0.2 - 1e-4, 200)
        assert np.all(np.diff(cut.log_psi(s)) >= 0.0)

    def test_no_overflow_for_huge_A(self):
        """log psi stays finite close to the blow-up point."""
        cut = make_unbounded_cutoff(1e6)
        assert np.all(np.isfinite(cut.log_psi(np.array([0.2 - 1e-9, 0.19]))))

    def test_defined_left_of_blowup(self):
        """psi is undefined at s >= 0.2."""
        with pytest.raises(DomainError):
            make_unbounded_cutoff(100.0).log_psi(np.array([0.2]))

    def test_requires_large_A(self):
        """A < 36 is rejected."""
        with pytest.raises(DomainError):
            make_unbounded_cutoff(10.0)

    def test_polynomial_family_is_not_monotone(self):
        """The cubic-in-theta interpolation turns downward and is rejected."""
        with pytest.raises(ConstructionError) as exc:
            make_unbounded_cutoff(100.0, "polynomial")
        assert 0.584 < exc.value.margins["at_fraction"] < 0.973
        assert exc.value.margins["min_slope"] < 0.0

    @pytest.mark.parametrize("A", A_VALUES)
    def test_plateau_edge(self, A):
        """The plateau ends about 1.25/A left of the blow-up, inside 0.2 - (k+1)/A."""
        cut = make_unbounded_cutoff(A)
        assert cut.width * A == pytest.approx(0.25, rel=1e-3)
        assert cut.s0 == pytest.approx(0.2 - 1.25 / A, rel=1e-3)
        assert cut.s0 > 0.2 - (cut.k + 1.0) / A
        assert cut.log_psi(np.array([cut.s0 - 1e-3 / A]))[0] == 0.0
