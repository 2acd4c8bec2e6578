# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Rotationally symmetric Riemannian manifolds.

A RadialGeometry is the warped product ds^2 + f(s)^2 g_{S^{m-1}} sampled on a
uniform arc-length grid. Disk-like geometries have one pole at s=0 and an outer
boundary at s_max; sphere-like geometries close up with a second pole at s_max.

Derivatives of the warp use fourth-order central differences with ghost points
(odd reflection at poles, polynomial extrapolation at an outer boundary). The
values at poles come from extrapolation in s^2, which is the even-extension
limit of the smooth curvature.

Example usage:
    geom = round_sphere(3, 1.0, n_cells=512)
    curv = compute_curvature(geom)
    vol = ball_volume(geom, GeodesicBall("north", 0.5))
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Literal, Optional

import numpy as np
import numpy.typing as npt
from scipy.interpolate import CubicSpline, PPoly
from scipy.special import gammaln

from .exceptions import ConfigurationError, DomainError, InvalidGeometryError
from .validation import validate_choice, validate_dimension, validate_int, validate_positive

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
Topology = Literal["disk", "sphere"]
Pole = Literal["north", "south"]
Parity = Literal["odd", "even", "extrapolate"]

# extrapolation to s=0 in the variable s^2 from nodes 1, 2, 3
_POLE_WEIGHTS = np.array([1.5, -0.6, 0.1])


def unit_ball_constant(m: int) -> float:
    """Volume of the Euclidean unit ball, omega_m = pi^(m/2) / Gamma(m/2 + 1)."""
    m = validate_int(m, "dimension m", min_value=1)
    return float(np.exp(0.5 * m * np.log(np.pi) - gammaln(0.5 * m + 1.0)))


def unit_sphere_area(m: int) -> float:
    """Area of the unit (m-1)-sphere, m * omega_m."""
    return m * unit_ball_constant(m)


def pad_ghosts(values: FloatArray, left: Parity, right: Parity) -> FloatArray:
    """Extend samples by two ghost points at each end."""
    v = values
    if left == "odd":
        lo = [-v[2], -v[1]]
    elif left == "even":
        lo = [v[2], v[1]]
    else:
        g1 = 5 * v[0] - 10 * v[1] + 10 * v[2] - 5 * v[3] + v[4]
        g2 = 5 * g1 - 10 * v[0] + 10 * v[1] - 5 * v[2] + v[3]
        lo = [g2, g1]
    if right == "odd":
        hi = [-v[-2], -v[-3]]
    elif right == "even":
        hi = [v[-2], v[-3]]
    else:
        g1 = 5 * v[-1] - 10 * v[-2] + 10 * v[-3] - 5 * v[-4] + v[-5]
        g2 = 5 * g1 - 10 * v[-1] + 10 * v[-2] - 5 * v[-3] + v[-4]
        hi = [g1, g2]
    return np.concatenate([lo, v, hi])


def central_derivatives(
    values: FloatArray, h: float, left: Parity, right: Parity
) -> tuple[FloatArray, FloatArray]:
    """First and second derivatives by fourth-order central stencils."""
    p = pad_ghosts(values, left, right)
    d1 = (-p[4:] + 8.0 * p[3:-1] - 8.0 * p[1:-3] + p[:-4]) / (12.0 * h)
    d2 = (-p[4:] + 16.0 * p[3:-1] - 30.0 * p[2:-2] + 16.0 * p[1:-3] - p[:-4]) / (12.0 * h * h)
    return d1, d2


def extrapolate_to_pole(values: FloatArray, at_end: bool = False) -> float:
    """Pole value of an even function from its next three samples."""
    nodes = values[-4:-1][::-1] if at_end else values[1:4]
    return float(_POLE_WEIGHTS @ nodes)


@dataclass(frozen=True)
class CurvatureFields:
    """Scalar curvature and the two Ricci eigenvalues on the grid."""

    R: FloatArray
    ric_rad: FloatArray
    ric_sph: FloatArray

    @property
    def rc_norm(self) -> FloatArray:
        """Operator norm |Rc| = max of the absolute eigenvalues."""
        return np.maximum(np.abs(self.ric_rad), np.abs(self.ric_sph))

    @property
    def ric_min(self) -> FloatArray:
        return np.minimum(self.ric_rad, self.ric_sph)


def warped_curvature(
    m: int, f: FloatArray, fp: FloatArray, fpp: FloatArray
) -> CurvatureFields:
    """
    Curvature of ds^2 + f^2 g_{S^{m-1}} from the warp and its derivatives.

    Ric_rad = -(m-1) f''/f, Ric_sph = -f''/f + (m-2)(1 - f'^2)/f^2, and R is
    their trace. Every entry of f must be positive.
    """
    f = np.asarray(f, dtype=np.float64)
    if np.any(f <= 0):
        bad = int(np.argmax(f <= 0))
        raise InvalidGeometryError("non-positive warp where curvature was requested", bad)
    ratio = np.asarray(fpp, dtype=np.float64) / f
    ric_rad = -(m - 1) * ratio
    ric_sph = -ratio + (m - 2) * (1.0 - np.asarray(fp) ** 2) / f**2
    return CurvatureFields(R=ric_rad + (m - 1) * ric_sph, ric_rad=ric_rad, ric_sph=ric_sph)


@dataclass(frozen=True, eq=False)
class RadialGeometry:
    """
    A warped-product metric sampled on a uniform arc-length grid.

    Attributes:
        m: Manifold dimension (>= 3)
        topology: "disk" (pole at s=0) or "sphere" (poles at both ends)
        s: Arc-length nodes 0 = s_0 < ... < s_N
        f: Warp samples, zero exactly at poles
        pole_tolerance: Allowed deviation of the pole slope from 1 (default 10 ds^2)
    """

    m: int
    topology: Topology
    s: FloatArray
    f: FloatArray
    pole_tolerance: Optional[float] = None

    def __post_init__(self) -> None:
        validate_dimension(self.m)
        validate_choice(self.topology, "topology", ("disk", "sphere"))
        s = np.array(self.s, dtype=np.float64)
        f = np.array(self.f, dtype=np.float64)
        if s.ndim != 1 or s.size != f.size or s.size < 9:
            raise InvalidGeometryError("grid and warp must be 1-D of equal length >= 9")
        if s[0] != 0.0:
            raise InvalidGeometryError("arc length must start at the pole s=0")
        steps = np.diff(s)
        h = (s[-1] - s[0]) / (s.size - 1)
        if np.any(steps <= 0) or np.max(np.abs(steps - h)) > 1e-9 * h:
            raise InvalidGeometryError("arc-length grid must be uniform and increasing")
        if not np.all(np.isfinite(f)):
            raise InvalidGeometryError("warp contains non-finite samples")

        scale = float(np.max(np.abs(f)))
        poles = [0] if self.topology == "disk" else [0, f.size - 1]
        for i in poles:
            if abs(f[i]) > 1e-10 * scale:
                raise InvalidGeometryError("warp must vanish at poles", i)
            f[i] = 0.0
        interior = np.ones(f.size, dtype=bool)
        interior[poles] = False
        if np.any(f[interior] <= 0):
            bad = int(np.flatnonzero(interior & (f <= 0))[0])
            raise InvalidGeometryError("warp must be positive away from poles", bad)

        tol = self.pole_tolerance if self.pole_tolerance is not None else 10.0 * h * h
        slopes = [f[1] / h] + ([f[-2] / h] if self.topology == "sphere" else [])
        for slope in slopes:
            if abs(slope - 1.0) > tol:
                raise InvalidGeometryError(
                    f"pole slope {slope:.6g} differs from 1 by more than {tol:.3g}",
                    suggestion="Refine the grid or smooth the warp near the poles",
                )

        s.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "f", f)

    @property
    def ds(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def s_max(self) -> float:
        return float(self.s[-1])

    @property
    def n_cells(self) -> int:
        return int(self.s.size - 1)

    @property
    def is_sphere(self) -> bool:
        return self.topology == "sphere"

    @property
    def right_parity(self) -> Parity:
        return "odd" if self.is_sphere else "extrapolate"

    @cached_property
    def curvature(self) -> CurvatureFields:
        return compute_curvature(self)

    @cached_property
    def warp_derivatives(self) -> tuple[FloatArray, FloatArray]:
        return central_derivatives(self.f, self.ds, "odd", self.right_parity)

    @cached_property
    def _warp_spline(self) -> CubicSpline:
        return CubicSpline(self.s, self.f)

    @cached_property
    def _density(self) -> CubicSpline:
        return CubicSpline(self.s, unit_sphere_area(self.m) * self.f ** (self.m - 1))

    @cached_property
    def _cumulative(self) -> PPoly:
        return self._density.antiderivative()

    def warp_at(self, s: npt.ArrayLike) -> FloatArray:
        """Warp interpolated at arbitrary arc length (clipped to the grid)."""
        q = np.clip(np.asarray(s, dtype=np.float64), 0.0, self.s_max)
        return np.maximum(self._warp_spline(q), 0.0)

    def density_at(self, s: npt.ArrayLike) -> FloatArray:
        """Volume density sigma_{m-1} f^{m-1} at arbitrary arc length."""
        q = np.clip(np.asarray(s, dtype=np.float64), 0.0, self.s_max)
        return np.maximum(self._density(q), 0.0)

    def cumulative_volume(self, s: npt.ArrayLike) -> FloatArray:
        """Volume of {0 <= s' <= s}."""
        q = np.clip(np.asarray(s, dtype=np.float64), 0.0, self.s_max)
        return np.asarray(self._cumulative(q), dtype=np.float64)

    def total_volume(self) -> float:
        return float(self.cumulative_volume(self.s_max))

    def curvature_at(self, s: npt.ArrayLike) -> FloatArray:
        """Scalar curvature linearly interpolated at arbitrary arc length."""
        return np.interp(np.asarray(s, dtype=np.float64), self.s, self.curvature.R)

    def laplacian_of_distance(self, s: npt.ArrayLike, pole: Pole = "north") -> FloatArray:
        """Delta d = (m-1) f'/f for the distance d to a pole."""
        fp = np.interp(np.asarray(s, dtype=np.float64), self.s, self.warp_derivatives[0])
        sign = 1.0 if pole == "north" else -1.0
        return sign * (self.m - 1) * fp / self.warp_at(s)

    def scaled(self, c: float) -> RadialGeometry:
        """Parabolic scaling g -> c^2 g (arc length and warp both multiplied by c)."""
        c = validate_positive(c, "scale factor")
        tol = None if self.pole_tolerance is None else self.pole_tolerance
        return RadialGeometry(self.m, self.topology, self.s * c, self.f * c, tol)


def curvature_on_gauge(
    m: int, topology: Topology, x: FloatArray, f: FloatArray, phi: FloatArray
) -> CurvatureFields:
    """
    Curvature of phi(x)^2 dx^2 + f(x)^2 g_{S^{m-1}} on a uniform x-grid.

    Unit-radial derivatives are f_r = f_x/phi and f_rr = (f_xx - phi_x f_x/phi)/phi^2.
    Pole values are even-extension limits.
    """
    h = float(x[1] - x[0])
    right: Parity = "odd" if topology == "sphere" else "extrapolate"
    fx, fxx = central_derivatives(f, h, "odd", right)
    phix, _ = central_derivatives(phi, h, "even", "even" if topology == "sphere" else "extrapolate")
    fr = fx / phi
    frr = (fxx - phix * fx / phi) / phi**2

    n = f.size
    inner = slice(1, n - 1) if topology == "sphere" else slice(1, n)
    core = warped_curvature(m, f[inner], fr[inner], frr[inner])
    ric_rad = np.empty(n)
    ric_sph = np.empty(n)
    ric_rad[inner] = core.ric_rad
    ric_sph[inner] = core.ric_sph
    ric_rad[0] = extrapolate_to_pole(ric_rad)
    ric_sph[0] = extrapolate_to_pole(ric_sph)
    if topology == "sphere":
        ric_rad[-1] = extrapolate_to_pole(ric_rad, at_end=True)
        ric_sph[-1] = extrapolate_to_pole(ric_sph, at_end=True)
    return CurvatureFields(R=ric_rad + (m - 1) * ric_sph, ric_rad=ric_rad, ric_sph=ric_sph)


def compute_curvature(geom: RadialGeometry) -> CurvatureFields:
    """
    Curvature fields of a radial geometry, pole values included.

    Raises:
        InvalidGeometryError: If an interior warp sample is non-positive
    """
    return curvature_on_gauge(geom.m, geom.topology, geom.s, geom.f, np.ones_like(geom.f))


@dataclass(frozen=True)
class GeodesicBall:
    """A geodesic ball centred at a pole."""

    center: Pole
    radius: float

    def __post_init__(self) -> None:
        validate_choice(self.center, "ball center", ("north", "south"))
        if not np.isfinite(self.radius) or self.radius < 0:
            raise DomainError("GeodesicBall", f"radius must be finite and >= 0, got {self.radius}")


@dataclass(frozen=True)
class RadialDomain:
    """
    A radial sub-interval [s_lo, s_hi] of a geometry.

    An end lying on a pole is free (no boundary there); any other end is a wall
    where trial functions vanish.
    """

    s_lo: float
    s_hi: float
    clipped: bool = False

    @property
    def length(self) -> float:
        return self.s_hi - self.s_lo

    def free_ends(self, geom: RadialGeometry) -> tuple[bool, bool]:
        tol = 1e-12 * max(geom.s_max, 1.0)
        left = self.s_lo <= tol
        right = geom.is_sphere and self.s_hi >= geom.s_max - tol
        return left, right


def ball_domain(geom: RadialGeometry, ball: GeodesicBall) -> RadialDomain:
    """
    Radial interval covered by a ball.

    A radius reaching past the far pole of a sphere covers the whole manifold;
    on a disk the interval is clipped to the outer boundary and flagged.
    """
    if ball.center == "south" and not geom.is_sphere:
        raise DomainError("ball_domain", "disk-like geometries have no south pole")
    clipped = ball.radius > geom.s_max
    if clipped and not geom.is_sphere:
        logger.warning("ball radius %.6g clipped to disk radius %.6g", ball.radius, geom.s_max)
    r = min(ball.radius, geom.s_max)
    if ball.center == "north":
        return RadialDomain(0.0, r, clipped=clipped and not geom.is_sphere)
    return RadialDomain(geom.s_max - r, geom.s_max)


def ball_volume(geom: RadialGeometry, ball: GeodesicBall) -> float:
    """Volume of a geodesic ball, the integral of sigma_{m-1} f^{m-1} over its radii."""
    dom = ball_domain(geom, ball)
    return domain_volume(geom, dom)


def domain_volume(geom: RadialGeometry, dom: RadialDomain) -> float:
    if dom.length <= 0:
        return 0.0
    hi, lo = geom.cumulative_volume([dom.s_hi, dom.s_lo])
    return float(hi - lo)


def volume_ratio(geom: RadialGeometry, ball: GeodesicBall) -> float:
    """|B| / (omega_m rho^m); equals 1 for rho = 0 by continuity."""
    if ball.radius == 0:
        return 1.0
    log_ref = np.log(unit_ball_constant(geom.m)) + geom.m * np.log(ball.radius)
    return float(ball_volume(geom, ball) / np.exp(log_ref))


@dataclass(frozen=True)
class CurvatureBounds:
    """Per-domain bounds: lam_upper = max R, lam_lower = max(-min R, 0), K from min Ric."""

    lam_upper: float
    lam_lower: float
    K: float


def curvature_bounds(geom: RadialGeometry, dom: RadialDomain) -> CurvatureBounds:
    """Curvature bounds over the closed domain (endpoints included)."""
    curv = geom.curvature
    inside = (geom.s >= dom.s_lo) & (geom.s <= dom.s_hi)
    ends = np.array([dom.s_lo, dom.s_hi])
    R = np.concatenate([curv.R[inside], np.interp(ends, geom.s, curv.R)])
    ric = np.concatenate([curv.ric_min[inside], np.interp(ends, geom.s, curv.ric_min)])
    K = np.sqrt(max(0.0, -float(np.min(ric))) / (geom.m - 1))
    return CurvatureBounds(float(np.max(R)), max(-float(np.min(R)), 0.0), float(K))


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def euclidean(m: int, s_max: float, n_cells: int = 512) -> RadialGeometry:
    """Flat R^m restricted to the ball of radius s_max."""
    s = np.linspace(0.0, validate_positive(s_max, "s_max"), validate_int(n_cells, "n_cells", 8) + 1)
    return RadialGeometry(m, "disk", s, s.copy())


def round_sphere(m: int, a: float, n_cells: int = 512) -> RadialGeometry:
    """Round sphere of radius a, warp a sin(s/a)."""
    a = validate_positive(a, "sphere radius")
    s = np.linspace(0.0, np.pi * a, validate_int(n_cells, "n_cells", 8) + 1)
    f = a * np.sin(s / a)
    f[-1] = 0.0
    return RadialGeometry(m, "sphere", s, f)


def perturbed_sphere(
    m: int, a: float, amp: float, mode: int, n_cells: int = 512
) -> RadialGeometry:
    """
    Sphere with warp a sin(s/a) (1 + amp sin^2(mode s/a)).

    The squared sine keeps the factor even at both poles so the metric stays
    smooth there.
    """
    a = validate_positive(a, "sphere radius")
    mode = validate_int(mode, "mode", min_value=1)
    if amp <= -1.0:
        raise ConfigurationError("perturbed_sphere.amp", "amplitude must exceed -1")
    s = np.linspace(0.0, np.pi * a, validate_int(n_cells, "n_cells", 8) + 1)
    f = a * np.sin(s / a) * (1.0 + amp * np.sin(mode * s / a) ** 2)
    f[-1] = 0.0
    return RadialGeometry(m, "sphere", s, f)


_PRESET = re.compile(r"^\s*(\w+)\s*\((.*)\)\s*$")


def from_preset(preset: str, n_cells: int = 512) -> RadialGeometry:
    """
    Build a geometry from a config string such as "sphere(3, 1.0)".

    Supported: euclidean(m, s_max), sphere(m, a), perturbed_sphere(m, a, amp, mode).
    """
    match = _PRESET.match(preset)
    if not match:
        raise ConfigurationError("geometry.preset", f"cannot parse '{preset}'", "Use e.g. sphere(3, 1.0)")
    name, raw = match.group(1), match.group(2)
    try:
        args = [float(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise ConfigurationError("geometry.preset", f"non-numeric arguments in '{preset}'")

    builders = {"euclidean": (euclidean, 2), "sphere": (round_sphere, 2), "perturbed_sphere": (perturbed_sphere, 4)}
    if name not in builders:
        raise ConfigurationError(
            "geometry.preset", f"unknown preset '{name}'", f"Use one of {', '.join(builders)}"
        )
    builder, arity = builders[name]
    if len(args) != arity:
        raise ConfigurationError("geometry.preset", f"{name} takes {arity} arguments, got {len(args)}")
    m = int(args[0])
    if name == "perturbed_sphere":
        return perturbed_sphere(m, args[1], args[2], int(args[3]), n_cells)
    return builder(m, args[1], n_cells)  # type: ignore[operator]
