# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Ricci flow of rotationally symmetric metrics.

Flows live in a fixed-coordinate gauge: the metric at time t is
phi(x,t)^2 dx^2 + f(x,t)^2 g_{S^{m-1}} on the initial arc-length grid x. With
the normalization d/dt g = -2 Rc - k lam g this gives

    d/dt f       = f_rr - (m-2)(1 - f_r^2)/f - (k lam/2) f
    d/dt log phi = (m-1) f_rr/f - k lam/2

where r is the unit-radial coordinate, d/dr = phi^{-1} d/dx. Three kinds are
supported: a static flat flow, the exact shrinking round sphere and a
numerical evolution by a linearly implicit Euler scheme for f followed by an
explicit update of log phi.

Example usage:
    geom = round_sphere(3, 1.0, n_cells=128)
    flow = evolve(geom, FlowSpec("numerical_warped", T=0.2, dt=1e-4))
    slice_geom = flow.geometry_at(-1)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Literal, Optional

import numpy as np
import numpy.typing as npt
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .exceptions import ConfigurationError, DomainError, HorizonTruncatedError
from .geometry import (
    CurvatureFields,
    Pole,
    RadialGeometry,
    central_derivatives,
    curvature_on_gauge,
)
from .validation import validate_choice, validate_float, validate_int, validate_positive

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
FlowKind = Literal["static_euclidean", "round_sphere_exact", "numerical_warped"]
FLOW_KINDS: tuple[str, ...] = ("static_euclidean", "round_sphere_exact", "numerical_warped")

# a flow is declared extinct once max f drops below this fraction of its start
EXTINCTION_FRACTION = 0.05


@dataclass(frozen=True)
class FlowSpec:
    """How to evolve: kind, horizon T, normalization k and constant lam, time step."""

    kind: FlowKind
    T: float
    k: float = 1.0
    lam: float = 0.0
    dt: float = 1e-4
    n_slices: int = 20

    def __post_init__(self) -> None:
        validate_choice(self.kind, "flow kind", FLOW_KINDS)
        validate_positive(self.T, "horizon T")
        validate_float(self.k, "k", min_value=1.0, max_value=2.0)
        validate_float(self.lam, "lam", min_value=-1.0, max_value=1.0)
        validate_positive(self.dt, "dt")
        validate_int(self.n_slices, "n_slices", min_value=1)


def sphere_radius_squared(m: int, a0: float, t: npt.ArrayLike, k: float = 1.0, lam: float = 0.0) -> FloatArray:
    """a(t)^2 of the exact shrinking sphere under d/dt g = -2 Rc - k lam g."""
    t = np.asarray(t, dtype=np.float64)
    if lam == 0.0:
        return a0 * a0 - 2.0 * (m - 1) * t
    c = 2.0 * (m - 1) / (k * lam)
    return (a0 * a0 + c) * np.exp(-k * lam * t) - c


def sphere_extinction_time(m: int, a0: float, k: float = 1.0, lam: float = 0.0) -> float:
    """First time the exact sphere radius reaches zero (inf if never)."""
    if lam == 0.0:
        return a0 * a0 / (2.0 * (m - 1))
    c = 2.0 * (m - 1) / (k * lam)
    ratio = c / (a0 * a0 + c)
    if ratio <= 0.0:
        return math.inf
    return -math.log(ratio) / (k * lam)


@dataclass(frozen=True)
class SliceFields:
    """Warp, gauge factor and scalar curvature on the fixed x-grid at one time."""

    t: float
    f: FloatArray
    phi: FloatArray
    R: FloatArray


@dataclass(frozen=True, eq=False)
class FlowSolution:
    """
    A Ricci flow sampled at uniform time slices on a fixed radial grid.

    Attributes:
        m: Dimension
        topology: "disk" or "sphere"
        kind: Flow kind that produced the slices
        x: Fixed radial coordinate (arc length at t = 0)
        times: Slice times 0 = t_0 < ... < t_M = T
        warp: f(x, t_i), shape (M+1, N+1)
        phi: phi(x, t_i), shape (M+1, N+1)
        k, lam: Normalization parameters
        a0: Initial radius for the exact sphere
        provenance: How the slices were made
    """

    m: int
    topology: str
    kind: str
    x: FloatArray
    times: FloatArray
    warp: FloatArray
    phi: FloatArray
    k: float = 1.0
    lam: float = 0.0
    a0: Optional[float] = None
    provenance: dict[str, Any] = field(default_factory=dict)

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def n_slices(self) -> int:
        return int(self.times.size)

    @property
    def is_exact(self) -> bool:
        return self.kind in ("static_euclidean", "round_sphere_exact")

    def radius_at(self, t: npt.ArrayLike) -> FloatArray:
        """Radius a(t) of the exact sphere."""
        if self.kind != "round_sphere_exact" or self.a0 is None:
            raise DomainError("radius_at", "only the exact sphere has a closed-form radius")
        return np.sqrt(sphere_radius_squared(self.m, self.a0, t, self.k, self.lam))

    @cached_property
    def curvatures(self) -> list[CurvatureFields]:
        """Curvature fields of every slice on the x-grid."""
        out = []
        for i in range(self.n_slices):
            if self.kind == "static_euclidean":
                zero = np.zeros_like(self.x)
                out.append(CurvatureFields(zero, zero.copy(), zero.copy()))
            elif self.kind == "round_sphere_exact":
                ric = np.full_like(self.x, (self.m - 1) / float(self.radius_at(self.times[i])) ** 2)
                out.append(CurvatureFields(self.m * ric, ric, ric.copy()))
            else:
                out.append(curvature_on_gauge(self.m, self.topology, self.x, self.warp[i], self.phi[i]))  # type: ignore[arg-type]
        return out

    def bracket(self, t: float) -> tuple[int, float]:
        if t < -1e-12 * max(self.T, 1.0) or t > self.T * (1 + 1e-12):
            raise DomainError("FlowSolution", f"time {t:g} outside [0, {self.T:g}]")
        j = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.n_slices - 2))
        w = (t - self.times[j]) / (self.times[j + 1] - self.times[j])
        return j, float(np.clip(w, 0.0, 1.0))

    def fields_at(self, t: float) -> SliceFields:
        """
        Fields at any time in [0, T].

        Exact kinds use the closed form; numerical flows interpolate linearly
        between the neighbouring slices.
        """
        if self.kind == "static_euclidean":
            self.bracket(t)
            return SliceFields(t, self.warp[0], self.phi[0], np.zeros_like(self.x))
        if self.kind == "round_sphere_exact":
            self.bracket(t)
            a = float(self.radius_at(t))
            a0 = float(self.a0)  # type: ignore[arg-type]
            f = a * np.sin(self.x / a0)
            f[0] = 0.0
            f[-1] = 0.0
            return SliceFields(
                t, f, np.full_like(self.x, a / a0), np.full_like(self.x, self.m * (self.m - 1) / a**2)
            )
        if self.n_slices == 1:
            return SliceFields(t, self.warp[0], self.phi[0], self.curvatures[0].R)
        j, w = self.bracket(t)
        R = (1 - w) * self.curvatures[j].R + w * self.curvatures[j + 1].R
        return SliceFields(
            t,
            (1 - w) * self.warp[j] + w * self.warp[j + 1],
            (1 - w) * self.phi[j] + w * self.phi[j + 1],
            R,
        )

    def arc_length(self, phi: FloatArray) -> FloatArray:
        """Distance from the north pole along x for a gauge factor phi."""
        return np.asarray(CubicSpline(self.x, phi).antiderivative()(self.x), dtype=np.float64)

    def distance_at(self, t: float, pole: Pole = "north") -> FloatArray:
        """d_{g(t)}(x, pole) on the fixed grid."""
        arc = self.arc_length(self.fields_at(t).phi)
        return arc if pole == "north" else arc[-1] - arc

    def geometry_at(self, i: int) -> RadialGeometry:
        """Slice i resampled to a uniform arc-length grid."""
        t = float(self.times[i])
        sl = self.fields_at(t)
        n = self.x.size
        if self.kind == "static_euclidean":
            return RadialGeometry(self.m, self.topology, self.x, sl.f)  # type: ignore[arg-type]
        if self.kind == "round_sphere_exact":
            a = float(self.radius_at(t))
            s = np.linspace(0.0, np.pi * a, n)
            f = a * np.sin(s / a)
            f[-1] = 0.0
            return RadialGeometry(self.m, "sphere", s, f)
        arc = self.arc_length(sl.phi)
        s = np.linspace(0.0, arc[-1], n)
        x_of_s = CubicSpline(arc, self.x)(s)
        f = CubicSpline(self.x, sl.f)(x_of_s)
        f[0] = 0.0
        if self.topology == "sphere":
            f[-1] = 0.0
        return RadialGeometry(self.m, self.topology, s, f, pole_tolerance=5e-2)  # type: ignore[arg-type]


def _exact_sphere_check(geom: RadialGeometry) -> float:
    if not geom.is_sphere:
        raise ConfigurationError("flow.kind", "round_sphere_exact needs a sphere-like geometry")
    a0 = geom.s_max / np.pi
    err = float(np.max(np.abs(geom.f - a0 * np.sin(geom.s / a0))))
    if err > 1e-8 * a0:
        raise ConfigurationError(
            "flow.kind", "round_sphere_exact needs a round sphere", "Use numerical_warped instead"
        )
    return a0


def _slice_schedule(spec: FlowSpec) -> tuple[FloatArray, int, float]:
    times = np.linspace(0.0, spec.T, spec.n_slices + 1)
    per_slice = spec.T / spec.n_slices
    steps = max(1, math.ceil(per_slice / spec.dt - 1e-9))
    return times, steps, per_slice / steps


def _implicit_step(
    m: int, topology: str, x: FloatArray, f: FloatArray, phi: FloatArray, dt: float, k: float, lam: float
) -> tuple[FloatArray, FloatArray]:
    """
    One linearly implicit Euler step of f followed by the log phi update.

    Only interior nodes of f are solved for. The end nodes keep their values, which
    is the pole condition f = 0 on spheres and a Dirichlet wall at x_max on disks,
    so a disk flow has a frozen boundary. phi is updated at every node.
    """
    h = float(x[1] - x[0])
    n = f.size
    curv = curvature_on_gauge(m, topology, x, f, phi)  # type: ignore[arg-type]
    rhs = -curv.ric_sph * f - 0.5 * k * lam * f

    right = "odd" if topology == "sphere" else "extrapolate"
    fx, _ = central_derivatives(f, h, "odd", right)  # type: ignore[arg-type]
    phix, _ = central_derivatives(phi, h, "even", "even" if topology == "sphere" else "extrapolate")
    inner = slice(1, n - 1)
    fi, phii = f[inner], phi[inner]
    fr = fx[inner] / phii
    P = 1.0 / phii**2
    Q = 2.0 * (m - 2) * fr / (phii * fi) - phix[inner] / phii**3
    S = (m - 2) * (1.0 - fr**2) / fi**2 - 0.5 * k * lam

    lower = P / h**2 - Q / (2 * h)
    diag = -2.0 * P / h**2 + S
    upper = P / h**2 + Q / (2 * h)
    ab = np.zeros((3, n - 2))
    ab[0, 1:] = -dt * upper[:-1]
    ab[1, :] = 1.0 - dt * diag
    ab[2, :-1] = -dt * lower[1:]
    delta = solve_banded((1, 1), ab, dt * rhs[inner])

    f_new = f.copy()
    f_new[inner] += delta
    curv_new = curvature_on_gauge(m, topology, x, f_new, phi)  # type: ignore[arg-type]
    log_phi = np.log(phi) + dt * (-curv_new.ric_rad - 0.5 * k * lam)
    return f_new, np.exp(log_phi)


def evolve(geom0: RadialGeometry, spec: FlowSpec) -> FlowSolution:
    """
    Produce a Ricci flow from an initial radial geometry.

    Raises:
        ConfigurationError: If the kind does not fit the initial geometry
        HorizonTruncatedError: If the flow goes extinct before spec.T
    """
    times, steps, dt_eff = _slice_schedule(spec)
    x = np.array(geom0.s)
    m = geom0.m
    provenance: dict[str, Any] = {"kind": spec.kind, "n_cells": geom0.n_cells, "ds": geom0.ds}

    if spec.kind == "static_euclidean":
        if np.max(np.abs(geom0.curvature.R)) > 1e-8 or spec.lam != 0.0:
            raise ConfigurationError("flow.kind", "static_euclidean needs a flat geometry and lam = 0")
        warp = np.tile(geom0.f, (times.size, 1))
        phi = np.ones_like(warp)
        provenance["source"] = "closed-form"
        sol = FlowSolution(m, geom0.topology, spec.kind, x, times, warp, phi, spec.k, spec.lam, None, provenance)
        logger.info("static flat flow on [0, %g] with %d slices", spec.T, times.size)
        return sol

    if spec.kind == "round_sphere_exact":
        a0 = _exact_sphere_check(geom0)
        t_ext = sphere_extinction_time(m, a0, spec.k, spec.lam)
        if spec.T >= t_ext:
            raise HorizonTruncatedError(t_ext, spec.T, "exact sphere becomes extinct")
        a = np.sqrt(sphere_radius_squared(m, a0, times, spec.k, spec.lam))
        warp = a[:, None] * np.sin(x / a0)[None, :]
        warp[:, 0] = 0.0
        warp[:, -1] = 0.0
        phi = np.tile((a / a0)[:, None], (1, x.size))
        provenance["source"] = "closed-form"
        provenance["extinction_time"] = t_ext
        logger.info("exact sphere flow a0=%g on [0, %g], final radius %.6g", a0, spec.T, a[-1])
        return FlowSolution(m, "sphere", spec.kind, x, times, warp, phi, spec.k, spec.lam, a0, provenance)

    provenance.update(
        {
            "source": "numerical",
            "scheme": "linearly-implicit-euler",
            "implicit": True,
            "dt": spec.dt,
            "dt_effective": dt_eff,
            "steps_per_slice": steps,
            "dt_over_ds2": dt_eff / geom0.ds**2,
        }
    )
    f = np.array(geom0.f)
    phi = np.ones_like(f)
    fmax0 = float(np.max(f))
    warp = [f.copy()]
    phis = [phi.copy()]
    t = 0.0
    for i in range(1, times.size):
        for _ in range(steps):
            f_new, phi_new = _implicit_step(m, geom0.topology, x, f, phi, dt_eff, spec.k, spec.lam)
            bad = not (np.all(np.isfinite(f_new)) and np.all(np.isfinite(phi_new)))
            if bad or np.max(f_new) < EXTINCTION_FRACTION * fmax0 or np.any(f_new[1:-1] <= 0):
                raise HorizonTruncatedError(t, spec.T, "warp collapsed or became non-finite")
            f, phi = f_new, phi_new
            t += dt_eff
        warp.append(f.copy())
        phis.append(phi.copy())
        logger.debug("slice %d/%d at t=%.6g: max f=%.6g", i, times.size - 1, times[i], np.max(f))

    logger.info(
        "numerical flow on [0, %g]: %d slices x %d steps, dt=%.3g", spec.T, times.size - 1, steps, dt_eff
    )
    return FlowSolution(
        m, geom0.topology, spec.kind, x, times, np.array(warp), np.array(phis), spec.k, spec.lam, None, provenance
    )


# ---------------------------------------------------------------------------
# hypothesis and distance checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowHypothesisReport:
    """sup of t |Rc| over B_{g(t)}(x0, sqrt t) per slice against (m-1) A."""

    times: FloatArray
    sup_values: FloatArray
    bound: float

    @property
    def sup(self) -> float:
        return float(np.max(self.sup_values))

    @property
    def slice_passed(self) -> npt.NDArray[np.bool_]:
        return self.sup_values <= self.bound

    @property
    def passed(self) -> bool:
        return bool(np.all(self.slice_passed))


def check_flow_hypothesis(flow: FlowSolution, x0: Pole, A: float) -> FlowHypothesisReport:
    """Per-slice sup of t|Rc| on the parabolic ball of radius sqrt t around a pole."""
    A = validate_positive(A, "A")
    sups = np.zeros(flow.n_slices)
    for i, t in enumerate(flow.times):
        if t <= 0:
            continue
        d = flow.distance_at(float(t), x0)
        rc = flow.curvatures[i].rc_norm
        inside = d <= math.sqrt(t)
        order = np.argsort(d)
        edge = np.interp(math.sqrt(t), d[order], rc[order])
        sups[i] = t * max(float(np.max(rc[inside])) if np.any(inside) else 0.0, float(edge))
    report = FlowHypothesisReport(np.array(flow.times), sups, (flow.m - 1) * A)
    logger.info("flow hypothesis at %s with A=%g: sup=%.6g bound=%.6g", x0, A, report.sup, report.bound)
    return report


@dataclass(frozen=True)
class DistanceEvolutionReport:
    """Margins of d/dt d - Delta d + A/sqrt t on the region d > sqrt t."""

    times: FloatArray
    margins: FloatArray  # NaN outside the region
    tolerance: float

    @property
    def min_margin(self) -> float:
        finite = self.margins[np.isfinite(self.margins)]
        return float(np.min(finite)) if finite.size else math.inf

    @property
    def passed(self) -> bool:
        return self.min_margin >= -self.tolerance


def check_distance_evolution(
    flow: FlowSolution, x0: Pole, A: float, tolerance: float = 1e-6
) -> DistanceEvolutionReport:
    """
    Pointwise margins of the heat-operator bound on d + 2A sqrt t.

    Delta d = (m-1) f_r/f is evaluated at each node with d > sqrt t; poles are
    excluded and so are slices where the curvature hypothesis fails.
    """
    A = validate_positive(A, "A")
    hyp = check_flow_hypothesis(flow, x0, A)
    margins = np.full((flow.n_slices, flow.x.size), np.nan)
    h = float(flow.x[1] - flow.x[0])
    right = "odd" if flow.topology == "sphere" else "extrapolate"
    sign = 1.0 if x0 == "north" else -1.0
    for i in range(1, flow.n_slices):
        t = float(flow.times[i])
        if not hyp.slice_passed[i]:
            continue
        sl = flow.fields_at(t)
        d = flow.distance_at(t, x0)
        if flow.is_exact:
            eps = 1e-6 * flow.T
            lo, hi = max(t - eps, 0.0), min(t + eps, flow.T)
            dd_dt = (flow.distance_at(hi, x0) - flow.distance_at(lo, x0)) / (hi - lo)
        else:
            lo_i, hi_i = i - 1, min(i + 1, flow.n_slices - 1)
            t_lo, t_hi = float(flow.times[lo_i]), float(flow.times[hi_i])
            dd_dt = (flow.distance_at(t_hi, x0) - flow.distance_at(t_lo, x0)) / (t_hi - t_lo)
        fx, _ = central_derivatives(sl.f, h, "odd", right)  # type: ignore[arg-type]
        region = d > math.sqrt(t)
        region[0] = False
        if flow.topology == "sphere":
            region[-1] = False
        with np.errstate(divide="ignore", invalid="ignore"):
            lap = sign * (flow.m - 1) * (fx / sl.phi) / sl.f
        margin = dd_dt - lap + A / math.sqrt(t)
        margins[i, region] = margin[region]
    report = DistanceEvolutionReport(np.array(flow.times), margins, tolerance)
    logger.info("distance evolution at %s with A=%g: min margin %.6g", x0, A, report.min_margin)
    return report


def scalar_curvature_floor(flow: FlowSolution) -> FloatArray:
    """min R on each slice."""
    return np.array([float(np.min(c.R)) for c in flow.curvatures])


def rmin_nondecreasing(flow: FlowSolution, tolerance: float = 1e-6) -> bool:
    """Whether min R never decreases by more than tolerance between slices."""
    floor = scalar_curvature_floor(flow)
    return bool(np.all(np.diff(floor) >= -tolerance))
