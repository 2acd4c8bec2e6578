# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Reduced distance and reduced volume density by direct action minimization.

Curves are parametrized by sigma = sqrt(tau) and live in the meridian plane of
the rotationally symmetric flow, written in coordinates P = (x cos th, x sin th)
with x the flow's fixed radial coordinate. In sigma the action is

    L = int 2 sigma^2 R + |dP/dsigma|_g^2 / 2 dsigma,

which has no endpoint singularity. Minimization is L-BFGS-B with an analytic
gradient and a few random restarts; the reported l is an upper bound on the
true infimum.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy.optimize import minimize
from scipy.special import roots_jacobi

from .conjugate_heat import ConjugateHeatSolution, TerminalData, gaussian_terminal, node_volumes
from .exceptions import DomainError, ValidationError
from .flow import FlowSolution, check_flow_hypothesis
from .geometry import Pole, central_derivatives, unit_sphere_area
from .validation import validate_int, validate_positive

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

TOL_L = 1e-6
N_SIGMA = 128


@dataclass(frozen=True)
class SpaceTimeCurve:
    """
    A curve sampled at sigma_j, uniform in sigma.

    Time along the curve is t = t_ref - (sigma^2 - tau_shift).
    """

    sigma: FloatArray
    points: FloatArray
    t_ref: float
    tau_shift: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma.ndim != 1 or self.sigma.size < 2 or np.any(np.diff(self.sigma) <= 0):
            raise ValidationError("sigma", self.sigma, "a strictly increasing sample")
        if self.points.shape != (self.sigma.size, 2) or not np.all(np.isfinite(self.points)):
            raise ValidationError("points", self.points.shape, f"({self.sigma.size}, 2) finite array")

    @classmethod
    def radial(cls, sigma: FloatArray, x: FloatArray, t_ref: float, tau_shift: float = 0.0) -> SpaceTimeCurve:
        pts = np.column_stack([np.asarray(x, dtype=np.float64), np.zeros(len(x))])
        return cls(np.asarray(sigma, dtype=np.float64), pts, t_ref, tau_shift)

    @property
    def x(self) -> FloatArray:
        return np.hypot(self.points[:, 0], self.points[:, 1])

    @property
    def theta(self) -> FloatArray:
        return np.arctan2(self.points[:, 1], self.points[:, 0])

    @property
    def times(self) -> FloatArray:
        return self.t_ref - (self.sigma**2 - self.tau_shift)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"sigma": self.sigma, "s": self.x, "theta": self.theta})


def _sinc(u: FloatArray) -> tuple[FloatArray, FloatArray]:
    """sin(u)/u and its derivative, with series near 0."""
    small = np.abs(u) < 1e-3
    safe = np.where(small, 1.0, u)
    val = np.where(small, 1.0 - u**2 / 6.0, np.sin(safe) / safe)
    der = np.where(small, -u / 3.0 + u**3 / 30.0, (safe * np.cos(safe) - np.sin(safe)) / safe**2)
    return val, der


class _MetricSampler:
    """phi, q = f/x and R with their x-derivatives at one curve point per time."""

    def __init__(self, flow: FlowSolution, times: FloatArray) -> None:
        self.flow = flow
        self.times = times
        self.x_max = float(flow.x[-1])
        self.h = float(flow.x[1] - flow.x[0])
        if flow.kind == "round_sphere_exact":
            self.radius = np.asarray(flow.radius_at(times), dtype=np.float64)
        elif flow.kind == "numerical_warped":
            self._tables(times)

    def _tables(self, times: FloatArray) -> None:
        flow = self.flow
        x = flow.x
        h = self.h
        sphere = flow.topology == "sphere"
        right = "even" if sphere else "extrapolate"
        n = times.size
        self.phi_t = np.empty((n, x.size))
        self.phix_t = np.empty((n, x.size))
        self.q_t = np.empty((n, x.size))
        self.qx_t = np.empty((n, x.size))
        self.R_t = np.empty((n, x.size))
        self.Rx_t = np.empty((n, x.size))
        for j, t in enumerate(times):
            sl = flow.fields_at(float(t))
            fx, _ = central_derivatives(sl.f, h, "odd", "odd" if sphere else "extrapolate")
            q = np.empty_like(sl.f)
            q[1:] = sl.f[1:] / x[1:]
            q[0] = fx[0]
            self.phi_t[j] = sl.phi
            self.phix_t[j] = central_derivatives(sl.phi, h, "even", right)[0]
            self.q_t[j] = q
            self.qx_t[j] = central_derivatives(q, h, "even", "extrapolate")[0]
            self.R_t[j] = sl.R
            self.Rx_t[j] = central_derivatives(sl.R, h, "even", right)[0]

    def _rowwise(self, table: FloatArray, x: FloatArray) -> FloatArray:
        pos = np.clip(x / self.h, 0.0, table.shape[1] - 1.000001)
        idx = pos.astype(int)
        w = pos - idx
        rows = np.arange(table.shape[0])
        return table[rows, idx] * (1.0 - w) + table[rows, idx + 1] * w

    def metric(self, x: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
        x = np.clip(x, 0.0, self.x_max)
        kind = self.flow.kind
        if kind == "static_euclidean":
            one = np.ones_like(x)
            return one, np.zeros_like(x), one.copy(), np.zeros_like(x)
        if kind == "round_sphere_exact":
            a0 = float(self.flow.a0)  # type: ignore[arg-type]
            ratio = self.radius / a0
            val, der = _sinc(x / a0)
            return ratio, np.zeros_like(x), ratio * val, ratio * der / a0
        return (
            self._rowwise(self.phi_t, x),
            self._rowwise(self.phix_t, x),
            self._rowwise(self.q_t, x),
            self._rowwise(self.qx_t, x),
        )

    def curvature(self, x: FloatArray) -> tuple[FloatArray, FloatArray]:
        x = np.clip(x, 0.0, self.x_max)
        kind = self.flow.kind
        if kind == "static_euclidean":
            return np.zeros_like(x), np.zeros_like(x)
        if kind == "round_sphere_exact":
            m = self.flow.m
            return m * (m - 1) / self.radius**2, np.zeros_like(x)
        return self._rowwise(self.R_t, x), self._rowwise(self.Rx_t, x)


class _Action:
    """Discrete action and its gradient for a fixed sigma grid."""

    def __init__(self, flow: FlowSolution, sigma: FloatArray, t_ref: float, tau_shift: float) -> None:
        self.sigma = sigma
        ds = np.diff(sigma)
        self.ds = ds
        times = t_ref - (sigma**2 - tau_shift)
        mids = 0.5 * (sigma[:-1] + sigma[1:])
        mid_times = t_ref - (mids**2 - tau_shift)
        lo, hi = float(min(times.min(), mid_times.min())), float(max(times.max(), mid_times.max()))
        if lo < -1e-12 * max(flow.T, 1.0) or hi > flow.T * (1 + 1e-12):
            raise DomainError("action", f"curve times [{lo:g}, {hi:g}] leave [0, {flow.T:g}]")
        clip = np.clip
        self.nodes = _MetricSampler(flow, clip(times, 0.0, flow.T))
        self.mids = _MetricSampler(flow, clip(mid_times, 0.0, flow.T))
        trap = np.zeros(sigma.size)
        trap[:-1] += 0.5 * ds
        trap[1:] += 0.5 * ds
        self.pot_weight = 2.0 * sigma**2 * trap

    def __call__(self, P: FloatArray) -> tuple[float, FloatArray]:
        D = np.diff(P, axis=0)
        Pm = 0.5 * (P[:-1] + P[1:])
        xm = np.hypot(Pm[:, 0], Pm[:, 1])
        safe = np.maximum(xm, 1e-14)
        rho = Pm / safe[:, None]
        phi, phix, q, qx = self.mids.metric(xm)
        rd = np.sum(rho * D, axis=1)
        dd = np.sum(D * D, axis=1)
        gap = phi**2 - q**2
        kin = 0.5 * (q**2 * dd + gap * rd**2) / self.ds
        dK_dD = (q[:, None] ** 2 * D + (gap * rd)[:, None] * rho) / self.ds[:, None]
        radial = (q * qx * dd + (phi * phix - q * qx) * rd**2)[:, None] * rho
        turning = (gap * rd / safe)[:, None] * (D - rd[:, None] * rho)
        dK_dPm = (radial + turning) / self.ds[:, None]

        grad = np.zeros_like(P)
        grad[:-1] += -dK_dD + 0.5 * dK_dPm
        grad[1:] += dK_dD + 0.5 * dK_dPm

        xn = np.hypot(P[:, 0], P[:, 1])
        R, Rx = self.nodes.curvature(xn)
        pot = self.pot_weight * R
        rho_n = P / np.maximum(xn, 1e-14)[:, None]
        grad += (self.pot_weight * Rx)[:, None] * rho_n
        return float(np.sum(kin) + np.sum(pot)), grad


def action(flow: FlowSolution, curve: SpaceTimeCurve) -> float:
    """
    L = int sqrt(tau) (R + |gamma'|^2) dtau evaluated in sigma.

    Raises:
        DomainError: If the curve leaves the flow's space-time
    """
    if np.any(curve.x > flow.x[-1] * (1 + 1e-12)):
        raise DomainError("action", "curve leaves the radial grid")
    value, _ = _Action(flow, curve.sigma, curve.t_ref, curve.tau_shift)(curve.points)
    return value


@dataclass(frozen=True)
class ReducedDistanceResult:
    """l = L / (2 sqrt(tau_bar)) with its minimizing curve and optimizer diagnostics."""

    l: float
    action: float
    tau_bar: float
    curve: SpaceTimeCurve
    iterations: int
    grad_norm: float
    restarts: int
    approximate: bool

    def summary(self) -> dict[str, Any]:
        return {
            "l": self.l,
            "action": self.action,
            "tau_bar": self.tau_bar,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "restarts": self.restarts,
            "approximate": self.approximate,
        }


def _endpoint(x: float, theta: float) -> FloatArray:
    return np.array([x * math.cos(theta), x * math.sin(theta)])


def _minimize_curve(
    act: _Action,
    start: FloatArray,
    end: FloatArray,
    init: Optional[FloatArray],
    x_max: float,
    planar: bool,
) -> tuple[float, FloatArray, int, float, bool]:
    n = act.sigma.size
    if init is None:
        s = (act.sigma - act.sigma[0]) / (act.sigma[-1] - act.sigma[0])
        init = start[None, :] + s[:, None] * (end - start)[None, :]
    cols = 2 if planar else 1

    def unpack(z: FloatArray) -> FloatArray:
        P = np.zeros((n, 2))
        P[0], P[-1] = start, end
        P[1:-1, :cols] = z.reshape(n - 2, cols)
        return P

    def fun(z: FloatArray) -> tuple[float, FloatArray]:
        value, grad = act(unpack(z))
        return value, grad[1:-1, :cols].ravel()

    z0 = init[1:-1, :cols].ravel()
    bounds = [(-x_max, x_max)] * z0.size
    res = minimize(fun, z0, jac=True, method="L-BFGS-B", bounds=bounds, options={"maxiter": 5000, "ftol": 1e-15, "gtol": 1e-10})
    return float(res.fun), unpack(res.x), int(res.nit), float(np.max(np.abs(res.jac))) if res.jac.size else 0.0, bool(res.success)


def _solve(
    flow: FlowSolution,
    base: tuple[float, float],
    target: tuple[float, float],
    n_sigma: int,
    restarts: int,
    seed: int,
    init: Optional[FloatArray] = None,
    act: Optional[_Action] = None,
) -> ReducedDistanceResult:
    """Minimize over meridian-plane curves from (base x, base angle) at T to (target x, t)."""
    y, theta = base
    x, t = target
    tau_bar = flow.T - t
    if tau_bar <= 0:
        raise DomainError("reduced_distance", f"target time {t:g} must lie before T={flow.T:g}")
    if act is None:
        act = _Action(flow, np.linspace(0.0, math.sqrt(tau_bar), n_sigma + 1), flow.T, 0.0)
    sigma = act.sigma
    start, end = _endpoint(y, theta), _endpoint(x, 0.0)
    planar = abs(start[1]) > 1e-14 * max(1.0, y)
    x_max = float(flow.x[-1])

    best = _minimize_curve(act, start, end, init, x_max, planar)
    iters = best[2]
    ok = best[4]
    rng = np.random.default_rng(seed)
    s = np.linspace(0.0, 1.0, sigma.size)
    amp = 0.1 * (float(np.hypot(*(end - start))) + math.sqrt(tau_bar))
    for _ in range(restarts):
        bump = sum(rng.standard_normal() * np.sin((k + 1) * np.pi * s) for k in range(3))
        trial = best[1].copy()
        trial[:, 0] += amp * bump
        if planar:
            trial[:, 1] += amp * sum(rng.standard_normal() * np.sin((k + 1) * np.pi * s) for k in range(3))
        trial[:, 0] = np.clip(trial[:, 0], -x_max, x_max)
        cand = _minimize_curve(act, start, end, trial, x_max, planar)
        iters += cand[2]
        ok = ok or cand[4]
        if cand[0] < best[0]:
            best = cand
    L = best[0]
    curve = SpaceTimeCurve(sigma, best[1], flow.T, 0.0)
    return ReducedDistanceResult(
        L / (2.0 * math.sqrt(tau_bar)), L, tau_bar, curve, iters, best[3], restarts, not ok
    )


def reduced_distance(
    flow: FlowSolution,
    base: Union[float, tuple[float, float]],
    target: tuple[float, float],
    n_sigma: int = N_SIGMA,
    restarts: int = 3,
    seed: int = 0,
    tol_l: float = TOL_L,
) -> ReducedDistanceResult:
    """
    l((y, T), (x, t)) for axial points in the flow's fixed radial coordinate.

    base is y or (y, angle) with angle 0 (same ray as the target) or pi
    (opposite ray). Off-axis bases are rejected.
    """
    y, theta = (base, 0.0) if not isinstance(base, tuple) else base
    if min(abs(theta), abs(theta - math.pi)) > 1e-12:
        raise ValidationError("base angle", theta, "0 or pi", "Only axial base points are supported")
    n_sigma = validate_int(n_sigma, "n_sigma", min_value=4)
    x_max = float(flow.x[-1])
    for name, val in (("base", y), ("target", target[0])):
        if not 0.0 <= val <= x_max * (1 + 1e-12):
            raise DomainError("reduced_distance", f"{name} position {val:g} outside [0, {x_max:g}]")
    result = _solve(flow, (float(y), float(theta)), target, n_sigma, restarts, seed)
    m = flow.m
    if result.l + 0.5 * m < -tol_l:
        logger.warning("l + m/2 = %.3e is negative at target %s", result.l + 0.5 * m, target)
    if result.approximate:
        logger.warning("reduced distance to %s is approximate: optimizer stalled on all restarts", target)
    logger.debug("l=%.8g (tau_bar=%.4g, %d iterations)", result.l, result.tau_bar, result.iterations)
    return result


def scalar_lower_bound_violations(flow: FlowSolution) -> FloatArray:
    """min R + m / (2 (T - t)) per slice before T; negative entries break the lower bound."""
    out = []
    for i, t in enumerate(flow.times[:-1]):
        out.append(float(np.min(flow.curvatures[i].R)) + flow.m / (2.0 * (flow.T - t)))
    margins = np.array(out)
    if np.any(margins < 0):
        logger.warning("R >= -m/(2(T-t)) fails on %d slices", int(np.sum(margins < 0)))
    return margins


# ---------------------------------------------------------------------------
# base measures and reduced volume density
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BaseMeasure:
    """A radial probability density p on (M, g(T)) sampled on the flow's x-grid."""

    x: FloatArray
    density: FloatArray
    volumes: FloatArray
    m: int

    def __post_init__(self) -> None:
        if np.any(self.density < 0):
            raise ValidationError("base measure", self.density, "nonnegative values")
        mass = float(self.volumes @ self.density)
        if abs(mass - 1.0) > 1e-10:
            raise ValidationError("base measure", mass, "unit mass within 1e-10", "Use BaseMeasure.from_values")

    @classmethod
    def from_values(cls, flow: FlowSolution, values: npt.ArrayLike) -> BaseMeasure:
        sl = flow.fields_at(flow.T)
        vols = node_volumes(flow.m, flow.x, sl.f, sl.phi)
        raw = np.asarray(values, dtype=np.float64)
        mass = float(vols @ raw)
        if not mass > 0:
            raise ValidationError("base measure", raw, "positive mass")
        return cls(np.array(flow.x), raw / mass, vols, flow.m)

    @classmethod
    def from_terminal(cls, flow: FlowSolution, terminal: TerminalData) -> BaseMeasure:
        return cls.from_values(flow, terminal.values)

    @classmethod
    def gaussian(cls, flow: FlowSolution, tau_T: float, pole: Pole = "north") -> BaseMeasure:
        return cls.from_terminal(flow, gaussian_terminal(flow, tau_T, pole))

    def mix(self, other: BaseMeasure, alpha: float) -> BaseMeasure:
        """alpha p + (1 - alpha) q on the same grid."""
        return BaseMeasure(self.x, alpha * self.density + (1 - alpha) * other.density, self.volumes, self.m)

    def __call__(self, y: npt.ArrayLike) -> FloatArray:
        return np.interp(np.asarray(y, dtype=np.float64), self.x, self.density, right=0.0)


@dataclass(frozen=True)
class ReducedVolumeDensityField:
    """
    w(x, t) = int p(y) (4 pi (T - t))^{-m/2} exp(-l((y,T),(x,t))) dv(y) on a subgrid.

    l holds the p-average of the reduced distance; flags mark points where some
    per-base minimization was approximate.
    """

    x: FloatArray
    times: FloatArray
    w: FloatArray
    l: FloatArray
    flags: npt.NDArray[np.bool_]
    measure: BaseMeasure = field(repr=False)
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "x": np.tile(self.x, self.times.size),
                "t": np.repeat(self.times, self.x.size),
                "l": self.l.ravel(),
                "w": self.w.ravel(),
                "flag": self.flags.ravel(),
            }
        )


@dataclass(frozen=True)
class _Quadrature:
    radii: FloatArray
    weights: FloatArray
    cosines: FloatArray
    angle_weights: FloatArray
    mass: float


def _base_quadrature(flow: FlowSolution, p: BaseMeasure, n_base: int, n_angles: int) -> _Quadrature:
    support = np.flatnonzero(p.density > 1e-14 * np.max(p.density))
    lo = float(p.x[max(support[0] - 1, 0)])
    hi = float(p.x[min(support[-1] + 1, p.x.size - 1)])
    nodes, gw = np.polynomial.legendre.leggauss(n_base)
    y = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes
    sl = flow.fields_at(flow.T)

    dens = unit_sphere_area(flow.m) * np.interp(y, flow.x, sl.f) ** (flow.m - 1) * np.interp(y, flow.x, sl.phi)
    w = 0.5 * (hi - lo) * gw * p(y) * dens
    mass = float(np.sum(w))
    half = 0.5 * (flow.m - 3)
    c, cw = roots_jacobi(n_angles, half, half)
    return _Quadrature(y, w / mass, np.asarray(c), np.asarray(cw) / np.sum(cw), mass)


def _field_at(
    flow: FlowSolution,
    quad: _Quadrature,
    x: float,
    t: float,
    n_sigma: int,
    check: set[tuple[int, int]],
    seed: int,
) -> tuple[float, float, bool, float]:
    """(w, p-average of l, flagged, worst restart improvement) at one target."""
    m = flow.m
    tau_bar = flow.T - t
    acc_w = 0.0
    acc_l = 0.0
    flagged = False
    improvement = 0.0
    act = _Action(flow, np.linspace(0.0, math.sqrt(tau_bar), n_sigma + 1), flow.T, 0.0)
    for a, (c, cw) in enumerate(zip(quad.cosines, quad.angle_weights)):
        theta = math.acos(float(np.clip(c, -1.0, 1.0)))
        warm: Optional[FloatArray] = None
        prev: Optional[FloatArray] = None
        for k, (y, wy) in enumerate(zip(quad.radii, quad.weights)):
            init = None
            if warm is not None and prev is not None:
                shift = _endpoint(y, theta) - prev
                s = np.linspace(1.0, 0.0, warm.shape[0])
                init = warm + s[:, None] * shift[None, :]
            res = _solve(flow, (y, theta), (x, t), n_sigma, 0, seed, init, act)
            if (a, k) in check:
                fresh = _solve(flow, (y, theta), (x, t), n_sigma, 3, seed + 1 + k, act=act)
                improvement = max(improvement, res.l - fresh.l)
                if fresh.l < res.l:
                    res = fresh
            warm, prev = res.curve.points, _endpoint(y, theta)
            flagged = flagged or res.approximate
            acc_w += cw * wy * math.exp(-res.l)
            acc_l += cw * wy * res.l
    w = (4.0 * math.pi * tau_bar) ** (-0.5 * m) * acc_w
    return w, acc_l, flagged, improvement


def reduced_fields_wrt_measure(
    flow: FlowSolution,
    p: BaseMeasure,
    subgrid: tuple[Sequence[float], Sequence[float]],
    n_sigma: int = 64,
    n_base: int = 24,
    n_angles: int = 8,
    jobs: int = 1,
    seed: int = 0,
    restart_fraction: float = 0.05,
) -> tuple[FloatArray, ReducedVolumeDensityField]:
    """
    The p-averaged reduced distance and the reduced volume density on (x, t) targets.

    Base radii use Gauss-Legendre in y over the support of p; each base radius
    is averaged over its orbit with Gauss-Jacobi nodes in cos(angle). Curves
    are warm-started across neighbouring bases; a random fraction of
    (angle, base) pairs is re-solved with restarts as a check.
    """
    xs = np.asarray(subgrid[0], dtype=np.float64)
    ts = np.asarray(subgrid[1], dtype=np.float64)
    if np.any(ts < 0) or np.any(ts > flow.T * (1 + 1e-12)):
        raise DomainError("reduced_fields_wrt_measure", "subgrid times leave [0, T]")
    if np.any(xs < 0) or np.any(xs > flow.x[-1]):
        raise DomainError("reduced_fields_wrt_measure", "subgrid positions leave the grid")
    n_base = validate_int(n_base, "n_base", min_value=2)
    n_angles = validate_int(n_angles, "n_angles", min_value=1)
    quad = _base_quadrature(flow, p, n_base, n_angles)
    rng = np.random.default_rng(seed)
    pairs = [(a, k) for a in range(n_angles) for k in range(n_base)]
    n_check = max(1, int(round(restart_fraction * len(pairs)))) if restart_fraction > 0 else 0
    check = {pairs[i] for i in rng.choice(len(pairs), size=n_check, replace=False)} if n_check else set()
    scalar_lower_bound_violations(flow)

    targets = [(i, j) for i in range(ts.size) for j in range(xs.size)]

    def one(ij: tuple[int, int]) -> tuple[float, float, bool, float]:
        i, j = ij
        t = float(ts[i])
        if flow.T - t <= 1e-14 * max(flow.T, 1.0):
            return float(p(xs[j])), math.nan, False, 0.0
        return _field_at(flow, quad, float(xs[j]), t, n_sigma, check, seed)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(one, targets))
    else:
        values = [one(ij) for ij in targets]

    w = np.empty((ts.size, xs.size))
    lf = np.empty_like(w)
    flags = np.zeros_like(w, dtype=bool)
    worst = 0.0
    for (i, j), (wv, lv, fl, imp) in zip(targets, values):
        w[i, j], lf[i, j], flags[i, j] = wv, lv, fl
        worst = max(worst, imp)
    if np.any(flags):
        logger.warning("%d reduced-density points are flagged approximate", int(flags.sum()))
    field_ = ReducedVolumeDensityField(
        xs,
        ts,
        w,
        lf,
        flags,
        p,
        {
            "n_sigma": n_sigma,
            "n_base": n_base,
            "n_angles": n_angles,
            "quadrature_mass": quad.mass,
            "restart_checks": n_check,
            "max_restart_improvement": worst,
        },
    )
    logger.info("reduced fields on %d targets (max restart improvement %.2e)", len(targets), worst)
    return lf, field_


@dataclass(frozen=True)
class WUReport:
    """w - u on a shared subgrid; pass iff w <= u (1 + tol_w) everywhere."""

    w: FloatArray
    u: FloatArray
    tol_w: float

    @property
    def margins(self) -> FloatArray:
        return self.u * (1.0 + self.tol_w) - self.w

    @property
    def max_excess(self) -> float:
        return float(np.max(self.w - self.u))

    @property
    def passed(self) -> bool:
        return bool(np.all(self.margins >= 0))


def check_w_le_u(wfield: ReducedVolumeDensityField, chs: ConjugateHeatSolution, tol_w: float = 1e-4) -> WUReport:
    """Compare the reduced volume density with the conjugate heat solution from the same measure."""
    tol_w = validate_positive(tol_w, "tol_w")
    u = np.array([chs.value_at(wfield.x, float(t)) for t in wfield.times])
    report = WUReport(wfield.w, u, tol_w)
    logger.info("w <= u: max(w - u) = %.3e", report.max_excess)
    return report


# ---------------------------------------------------------------------------
# upper estimate report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReducedUpperReport:
    """Computed l on the estimate's windows against log(4m e^{F0/2})."""

    l_values: FloatArray
    log_bound: float
    hypothesis_ok: bool
    slackness: str = "astronomical"

    @property
    def max_l(self) -> float:
        return float(np.max(self.l_values))

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.l_values)))

    @property
    def passed(self) -> bool:
        return self.finite and (self.max_l <= 0 or math.log(self.max_l) <= self.log_bound)


def _position(flow: FlowSolution, t: float, pole: Pole, dist: float) -> float:
    """Fixed-grid coordinate at g(t)-distance dist from a pole."""
    d = flow.distance_at(t, "north")
    total = float(d[-1])
    dist = min(dist, total)
    target = dist if pole == "north" else total - dist
    return float(np.interp(target, d, flow.x))


def reduced_distance_upper_report(
    flow: FlowSolution,
    A: float,
    x0: Pole = "north",
    n_sigma: int = 64,
    samples: int = 3,
) -> ReducedUpperReport:
    """
    l((y, T), (x, T/2)) for y within A sqrt(T) and x within 0.1 sqrt(T) of a pole.

    The bound is evaluated in log form, log(4m) + F0/2 with F0 = 1000 A^2.
    """
    A = validate_positive(A, "A")
    hyp = check_flow_hypothesis(flow, x0, A)
    if not hyp.passed:
        logger.warning("reduced-distance estimate: flow hypothesis fails for A=%g", A)
    scalar_lower_bound_violations(flow)
    T = flow.T
    t = 0.5 * T
    root = math.sqrt(T)
    ys = [_position(flow, T, x0, r) for r in np.linspace(0.0, A * root, samples)]
    xs = [_position(flow, t, x0, r) for r in np.linspace(0.0, 0.1 * root, samples)]
    values = []
    for y in ys:
        for x in xs:
            values.append(reduced_distance(flow, y, (x, t), n_sigma=n_sigma, restarts=0).l)
    F0 = 1000.0 * A * A
    report = ReducedUpperReport(np.array(values), math.log(4.0 * flow.m) + 0.5 * F0, hyp.passed)
    logger.info("reduced-distance estimate: max l=%.4g, log bound=%.4g", report.max_l, report.log_bound)
    return report
