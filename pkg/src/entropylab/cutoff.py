# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Explicit cutoff functions and their certification.

Two cutoffs are built here:

* a bounded cutoff psi on [0, 3], psi = 1 on [0, 1], psi = 0 on [2, 3], with
  psi'' >= -10 psi, (psi')^2 <= 10 psi and -10 <= psi' <= 0;
* an unbounded cutoff on (-inf, 0.2), psi = 1 far left, blowing up at 0.2,
  with 2 (psi')^2/psi - psi'' - 4 A psi' >= -F0 psi.

Both are certified on dense grids before they are returned. The unbounded
cutoff is represented through y = log psi on its rational piece so that no
value overflows for large A.

The default ramps are constructions that pass certification. The literal
textbook ramps (quintic smoothstep, cubic-in-theta interpolation) are kept as
families so their certification failures can be demonstrated.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import numpy.typing as npt
import pandas as pd

from .exceptions import ConstructionError, DomainError
from .validation import validate_choice, validate_float, validate_int

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

E4 = float(np.exp(4.0))
A1 = 8.0 * E4 / (E4 - 1.0)
A2 = 32.0 * E4 * (E4 + 1.0) / (E4 - 1.0) ** 2
LOG_RATIONAL_SCALE = float(np.log(2.0 * (E4 - 1.0)))

BoundedFamily = Literal["squared-plateau", "quintic-smoothstep"]
UnboundedFamily = Literal["power", "polynomial"]

# accelerate over [0, 0.6], brake over [0.96, 1]
_ACCEL = 0.6
_BRAKE = 0.04


def _smoothstep(u: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Quintic smoothstep S, its derivative and its antiderivative (S(0)=0, S(1)=1)."""
    u = np.clip(u, 0.0, 1.0)
    s = u**3 * (10.0 - 15.0 * u + 6.0 * u * u)
    ds = 30.0 * u * u * (1.0 - u) ** 2
    integral = u**4 * (2.5 - 3.0 * u + u * u)
    return s, ds, integral


# ---------------------------------------------------------------------------
# bounded cutoff
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundedCutoff:
    """A certified bounded cutoff sampled on [0, 3]."""

    s: FloatArray
    psi: FloatArray
    dpsi: FloatArray
    ddpsi: FloatArray
    family: str
    margins: dict[str, float] = field(default_factory=dict)

    def __call__(self, s: npt.ArrayLike) -> FloatArray:
        return bounded_cutoff_values(s, self.family)[0]  # type: ignore[arg-type]

    def derivative(self, s: npt.ArrayLike) -> FloatArray:
        return bounded_cutoff_values(s, self.family)[1]  # type: ignore[arg-type]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"s": self.s, "psi": self.psi, "dpsi": self.dpsi, "ddpsi": self.ddpsi})


def bounded_cutoff_values(
    s: npt.ArrayLike, family: BoundedFamily = "squared-plateau"
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """psi, psi' and psi'' of a bounded cutoff family at arbitrary points."""
    x = np.clip(np.asarray(s, dtype=np.float64) - 1.0, 0.0, 1.0)
    if family == "quintic-smoothstep":
        step, dstep, _ = _smoothstep(x)
        dd = 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x)
        return 1.0 - step, -dstep, -dd

    # psi = eta^2 with eta' = -c * plateau(x)
    c = 1.0 / (1.0 - 0.5 * _ACCEL - 0.5 * _BRAKE)
    up, dup, iup = _smoothstep(x / _ACCEL)
    down, ddown, idown = _smoothstep((1.0 - x) / _BRAKE)
    accel = x < _ACCEL
    brake = x > 1.0 - _BRAKE
    plateau = np.where(accel, up, np.where(brake, down, 1.0))
    dplateau = np.where(accel, dup / _ACCEL, np.where(brake, -ddown / _BRAKE, 0.0))
    travelled = np.where(
        accel,
        _ACCEL * iup,
        np.where(
            brake,
            0.5 * _ACCEL + (1.0 - _BRAKE - _ACCEL) + _BRAKE * (0.5 - idown),
            0.5 * _ACCEL + (x - _ACCEL),
        ),
    )
    eta = np.maximum(1.0 - c * travelled, 0.0)
    deta = -c * plateau
    ddeta = -c * dplateau
    return eta * eta, 2.0 * eta * deta, 2.0 * deta * deta + 2.0 * eta * ddeta


def make_bounded_cutoff(
    family: BoundedFamily = "squared-plateau", n_points: int = 10_001
) -> BoundedCutoff:
    """
    Build and certify the bounded cutoff.

    The default family is psi = eta^2 where eta decreases from 1 to 0 with a C^1
    plateau-shaped slope profile. With |eta'| <= 1.47 and eta'' >= -5 eta - (eta')^2/eta
    the four defining properties hold; they are still checked on the grid.

    Raises:
        ConstructionError: If any certified margin is negative
    """
    validate_choice(family, "bounded cutoff family", ("squared-plateau", "quintic-smoothstep"))
    n_points = validate_int(n_points, "n_points", min_value=101)
    s = np.linspace(0.0, 3.0, n_points)
    psi, dpsi, ddpsi = bounded_cutoff_values(s, family)
    margins = {
        "second_derivative": float(np.min(ddpsi + 10.0 * psi)),
        "gradient_square": float(np.min(10.0 * psi - dpsi**2)),
        "slope_range": float(min(np.min(-dpsi), np.min(dpsi + 10.0))),
        "value_range": float(min(np.min(psi), np.min(1.0 - psi))),
    }
    if any(v < 0 for v in margins.values()):
        raise ConstructionError(f"bounded cutoff ({family})", margins)
    logger.info("bounded cutoff certified on %d points: %s", n_points, margins)
    return BoundedCutoff(s, psi, dpsi, ddpsi, family, margins)


# ---------------------------------------------------------------------------
# unbounded cutoff
# ---------------------------------------------------------------------------


def interpolation_coefficients(k: float) -> tuple[float, float, float]:
    """
    Coefficients of f'' = A^2 (c1 theta + c2 theta^2 + c3 theta^3) matching the
    rational piece to second order at theta = 1.

    Raises:
        DomainError: If k <= 2
    """
    k = validate_float(k, "k")
    if k <= 2.0:
        raise DomainError("interpolation_coefficients", f"k must exceed 2, got {k}")
    c1 = 3.0 * A2 - 24.0 * A1 / k + 60.0 / k**2
    c2 = -12.0 * A2 + 84.0 * A1 / k - 180.0 / k**2
    c3 = 10.0 * A2 - 60.0 * A1 / k + 120.0 / k**2
    return c1, c2, c3


@dataclass(frozen=True)
class UnboundedCutoff:
    """
    The unbounded cutoff, pieces joined at s0 < s1 = 0.2 - 1/A.

    psi = 1 on (-inf, s0], 1 + f(s - s0) on [s0, s1] and
    2(e^4 - 1)/(e^{4A(0.2-s)} - 1) on [s1, 0.2).
    """

    A: float
    k: float
    coefficients: tuple[float, float, float]
    family: str
    exponent: float
    width: float

    @property
    def s1(self) -> float:
        return 0.2 - 1.0 / self.A

    @property
    def s0(self) -> float:
        return self.s1 - self.width

    def interpolation(self, t: npt.ArrayLike) -> tuple[FloatArray, FloatArray, FloatArray]:
        """f, f', f'' on [0, width]."""
        t = np.clip(np.asarray(t, dtype=np.float64), 0.0, self.width)
        if self.family == "power":
            n, L = self.exponent, self.width
            u = t / L
            return u**n, n / L * u ** (n - 1), n * (n - 1) / L**2 * u ** (n - 2)
        c1, c2, c3 = self.coefficients
        A, k = self.A, self.k
        th = A * t / k
        f = k * k * th**3 * (c1 / 6.0 + c2 * th / 12.0 + c3 * th * th / 20.0)
        fp = k * A * th**2 * (c1 / 2.0 + c2 * th / 3.0 + c3 * th * th / 4.0)
        fpp = A * A * (c1 * th + c2 * th**2 + c3 * th**3)
        return f, fp, fpp

    def log_rational(self, s: npt.ArrayLike) -> tuple[FloatArray, FloatArray, FloatArray]:
        """y = log psi, y' and y'' on the rational piece, free of overflow."""
        z = 4.0 * self.A * (0.2 - np.asarray(s, dtype=np.float64))
        em1 = -np.expm1(-z)  # 1 - e^{-z}
        y = LOG_RATIONAL_SCALE - z - np.log(em1)
        yp = 4.0 * self.A / em1
        ypp = 16.0 * self.A**2 * np.exp(-z) / em1**2
        return y, yp, ypp

    def log_psi(self, s: npt.ArrayLike) -> FloatArray:
        s = np.asarray(s, dtype=np.float64)
        if np.any(s >= 0.2):
            raise DomainError("UnboundedCutoff.log_psi", "psi is only defined on (-inf, 0.2)")
        out = np.zeros_like(s)
        mid = (s > self.s0) & (s < self.s1)
        out[mid] = np.log1p(self.interpolation(s[mid] - self.s0)[0])
        right = s >= self.s1
        out[right] = self.log_rational(s[right])[0]
        return out

    def __call__(self, s: npt.ArrayLike) -> FloatArray:
        return np.exp(self.log_psi(s))

    def to_frame(self, n_points: int = 2001) -> pd.DataFrame:
        s = np.linspace(min(0.0, self.s0 - 0.01), 0.2 - 1e-3 / self.A, n_points)
        return pd.DataFrame({"s": s, "log_psi": self.log_psi(s)})


def make_unbounded_cutoff(A: float, family: UnboundedFamily = "power") -> UnboundedCutoff:
    """
    Build the unbounded cutoff for a given A >= 36.

    The "power" family interpolates with f(t) = (t/L)^n, n = 1/(1 - a2/a1^2) and
    L = n/(a1 A), which matches value, slope and curvature of the rational piece
    and is increasing. The "polynomial" family uses the cubic-in-theta f'' with
    k = sqrt(A); its slope turns negative near theta = 0.76 and construction fails.

    Raises:
        DomainError: If A < 36
        ConstructionError: If the interpolation is not increasing
    """
    A = validate_float(A, "A")
    validate_choice(family, "unbounded cutoff family", ("power", "polynomial"))
    if A < 36.0:
        raise DomainError("make_unbounded_cutoff", f"A must be at least 36, got {A}")
    k = float(np.sqrt(A))
    coeffs = interpolation_coefficients(k)
    n = 1.0 / (1.0 - A2 / A1**2)
    width = n / (A1 * A) if family == "power" else k / A
    cutoff = UnboundedCutoff(A, k, coeffs, family, n, width)

    t = np.linspace(0.0, width, 1001)[1:]
    slope = cutoff.interpolation(t)[1]
    if np.min(slope) <= 0:
        worst = int(np.argmin(slope))
        raise ConstructionError(
            f"unbounded cutoff ({family}, A={A:g})",
            {"min_slope": float(slope[worst]), "at_fraction": float(t[worst] / width)},
        )
    logger.info("unbounded cutoff built: A=%g family=%s joins=(%.6g, %.6g)", A, family, cutoff.s0, cutoff.s1)
    return cutoff


@dataclass(frozen=True)
class CutoffCertificate:
    """Minimum of (2(psi')^2/psi - psi'' - 4A psi')/psi + F0 per piece."""

    F0: float
    piece_margins: dict[str, float]
    join_errors: dict[str, float]

    @property
    def min_margin(self) -> float:
        return min(self.piece_margins.values())

    @property
    def passed(self) -> bool:
        return self.min_margin >= 0.0


def _cosine_grid(lo: float, hi: float, n: int) -> FloatArray:
    """Grid on [lo, hi] clustered toward hi."""
    u = np.linspace(0.0, 1.0, n)
    return lo + (hi - lo) * np.sin(0.5 * np.pi * u)


def verify_psi_inequality(
    cutoff: UnboundedCutoff, F0: float, n_points: int = 10_001
) -> CutoffCertificate:
    """
    Certify the cutoff differential inequality per piece.

    On the rational piece the check runs on y = log psi through
    (y')^2 - y'' - 4A y' + F0 >= 0, which is the inequality divided by psi.
    A negative margin is reported, not raised.
    """
    F0 = validate_float(F0, "F0")
    A = cutoff.A

    t = np.linspace(0.0, cutoff.width, n_points)
    f, fp, fpp = cutoff.interpolation(t)
    psi = 1.0 + f
    interp = (2.0 * fp**2 / psi - fpp - 4.0 * A * fp) / psi + F0

    s = _cosine_grid(cutoff.s1, 0.2 - 1e-4 / A, n_points)
    _, yp, ypp = cutoff.log_rational(s)
    rational = yp**2 - ypp - 4.0 * A * yp + F0

    y1, yp1, ypp1 = cutoff.log_rational(np.array([cutoff.s1]))
    fL, fpL, fppL = cutoff.interpolation(np.array([cutoff.width]))
    psi1 = float(np.exp(y1[0]))
    joins = {
        "value": abs(1.0 + float(fL[0]) - psi1) / psi1,
        "slope": abs(float(fpL[0]) - psi1 * float(yp1[0])) / (psi1 * float(yp1[0])),
        "curvature": abs(float(fppL[0]) - psi1 * float(ypp1[0] + yp1[0] ** 2))
        / (psi1 * float(ypp1[0] + yp1[0] ** 2)),
    }
    margins = {"plateau": F0, "interpolation": float(np.min(interp)), "rational": float(np.min(rational))}
    cert = CutoffCertificate(F0, margins, joins)
    if not cert.passed:
        logger.warning("cutoff inequality fails for A=%g F0=%g: %s", A, F0, margins)
    return cert
