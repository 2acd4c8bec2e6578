# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Conjugate heat flow and the Harnack quantities built on it.

The conjugate heat equation (-d/dt - Delta + R) u = 0 is solved backward from
terminal data at t = T in the variable tau = tau_T + T - t. The scheme is a
finite-volume implicit Euler step on the flow's fixed x-grid: the face fluxes
use the metric at the half step, the node volumes use the metric at the new
time, and the R u term enters through the change of those volumes. Discrete
mass is therefore conserved up to the linear solve.

From u the Harnack fields

    f = -log u - (m/2) log(4 pi tau)
    v = [tau (2 Delta f - |grad f|^2 + R) + f - m - mu] u

are computed by differences on each slice, only where u stays above a floor.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .entropy import MuResult, SolverOptions, minimize_mu
from .exceptions import DomainError, SolverAccuracyError, ValidationError
from .flow import FlowSolution
from .geometry import Pole, RadialDomain, central_derivatives, unit_sphere_area
from .validation import validate_array, validate_int, validate_positive

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

U_FLOOR = 1e-300
TOL_MASS = 1e-6

_XI, _WQ = np.polynomial.legendre.leggauss(5)


# ---------------------------------------------------------------------------
# finite-volume pieces
# ---------------------------------------------------------------------------


def node_volumes(m: int, x: FloatArray, warp: FloatArray, phi: FloatArray) -> FloatArray:
    """Dual-cell volumes of sigma f^{m-1} phi dx with f, phi linear between nodes."""
    h = float(x[1] - x[0])
    sigma = unit_sphere_area(m)
    vol = np.zeros(x.size)
    for lo, hi, target in ((0.0, 0.5, slice(0, -1)), (0.5, 1.0, slice(1, None))):
        xi = lo + (hi - lo) * 0.5 * (1.0 + _XI)
        w = (hi - lo) * 0.5 * _WQ * h
        f = warp[:-1, None] + (warp[1:] - warp[:-1])[:, None] * xi
        p = phi[:-1, None] + (phi[1:] - phi[:-1])[:, None] * xi
        vol[target] += sigma * np.sum(w * np.maximum(f, 0.0) ** (m - 1) * p, axis=1)
    return vol


def face_conductance(m: int, x: FloatArray, warp: FloatArray, phi: FloatArray) -> FloatArray:
    """sigma f^{m-1} / (phi h) at cell faces."""
    h = float(x[1] - x[0])
    f_mid = 0.5 * (warp[:-1] + warp[1:])
    p_mid = 0.5 * (phi[:-1] + phi[1:])
    return unit_sphere_area(m) * np.maximum(f_mid, 0.0) ** (m - 1) / (p_mid * h)


def weighted_integral(
    m: int,
    x: FloatArray,
    warp: FloatArray,
    phi: FloatArray,
    values: FloatArray,
    x_lo: float = 0.0,
    x_hi: Optional[float] = None,
) -> float:
    """int values dv over x_lo <= x <= x_hi with all fields linear between nodes."""
    x_hi = float(x[-1]) if x_hi is None else x_hi
    a = np.clip(x[:-1], x_lo, x_hi)
    b = np.clip(x[1:], x_lo, x_hi)
    length = b - a
    keep = length > 0
    if not np.any(keep):
        return 0.0
    h = float(x[1] - x[0])
    pts = 0.5 * (a + b)[:, None] + 0.5 * length[:, None] * _XI[None, :]
    frac = (pts - x[:-1, None]) / h

    def lerp(arr: FloatArray) -> FloatArray:
        return arr[:-1, None] + (arr[1:] - arr[:-1])[:, None] * frac

    dens = unit_sphere_area(m) * np.maximum(lerp(warp), 0.0) ** (m - 1) * lerp(phi)
    w = 0.5 * length[:, None] * _WQ[None, :]
    return float(np.sum((w * dens * lerp(values))[keep]))


def _right_parity(topology: str) -> Any:
    return "even" if topology == "sphere" else "extrapolate"


def radial_operators(
    m: int, topology: str, x: FloatArray, warp: FloatArray, phi: FloatArray, values: FloatArray
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """
    Unit-radial first and second derivative and the Laplacian of an even function.

    Delta = d_rr + (m-1)(f_r/f) d_r away from the poles and m d_rr at them.
    """
    h = float(x[1] - x[0])
    right = _right_parity(topology)
    vx, vxx = central_derivatives(values, h, "even", right)
    px, _ = central_derivatives(phi, h, "even", right)
    fx, _ = central_derivatives(warp, h, "odd", "odd" if topology == "sphere" else "extrapolate")
    vr = vx / phi
    vrr = (vxx - px * vx / phi) / phi**2
    lap = np.empty_like(values)
    n = values.size
    inner = slice(1, n - 1) if topology == "sphere" else slice(1, n)
    lap[inner] = vrr[inner] + (m - 1) * (fx[inner] / phi[inner]) / warp[inner] * vr[inner]
    lap[0] = m * vrr[0]
    if topology == "sphere":
        lap[-1] = m * vrr[-1]
    return vr, vrr, lap


# ---------------------------------------------------------------------------
# terminal data and the solve
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TerminalData:
    """
    Terminal density at t = T on the flow's x-grid.

    Attributes:
        values: u_T at the nodes, unit discrete mass
        tau_T: Value of tau at t = T
        kind: "gaussian", "minimizer" or "array"
        factor: Renormalization factor applied to the raw values
        mu: The mu of the producing minimizer, when there is one
    """

    values: FloatArray
    tau_T: float
    kind: str
    factor: float
    mu: Optional[float] = None
    source: Optional[MuResult] = field(default=None, repr=False)


def _terminal_volumes(flow: FlowSolution) -> FloatArray:
    sl = flow.fields_at(flow.T)
    return node_volumes(flow.m, flow.x, sl.f, sl.phi)


def _normalized(flow: FlowSolution, raw: FloatArray) -> tuple[FloatArray, float]:
    mass = float(_terminal_volumes(flow) @ raw)
    if not mass > 0:
        raise ValidationError("terminal data", raw, "nonnegative values with positive mass")
    return raw / mass, 1.0 / mass


def gaussian_terminal(flow: FlowSolution, tau_T: float, pole: Pole = "north") -> TerminalData:
    """(4 pi tau_T)^{-m/2} exp(-d^2 / (4 tau_T)) around a pole of g(T)."""
    tau_T = validate_positive(tau_T, "tau_T")
    d = flow.distance_at(flow.T, pole)
    raw = (4.0 * math.pi * tau_T) ** (-0.5 * flow.m) * np.exp(-(d**2) / (4.0 * tau_T))
    values, factor = _normalized(flow, raw)
    return TerminalData(values, tau_T, "gaussian", factor)


def minimizer_terminal(flow: FlowSolution, result: MuResult) -> TerminalData:
    """Square of a minimizer computed on g(T), transferred to the x-grid."""
    arc = flow.arc_length(flow.fields_at(flow.T).phi)
    raw = result.minimizer(arc) ** 2
    values, factor = _normalized(flow, raw)
    if abs(factor - 1.0) > 1e-2:
        logger.warning("minimizer terminal data renormalized by %.6g", factor)
    return TerminalData(values, result.tau, "minimizer", factor, result.mu, result)


def array_terminal(flow: FlowSolution, values: npt.ArrayLike, tau_T: float) -> TerminalData:
    tau_T = validate_positive(tau_T, "tau_T")
    raw = validate_array(values, "terminal_u", length=flow.x.size, nonnegative=True)
    normed, factor = _normalized(flow, raw)
    if abs(factor - 1.0) > TOL_MASS:
        raise ValidationError("terminal_u", 1.0 / factor, "unit mass", "Normalize the terminal data")
    return TerminalData(normed, tau_T, "array", factor)


@dataclass(frozen=True, eq=False)
class ConjugateHeatSolution:
    """u(x, t_i) on the flow's slices with its discrete masses."""

    flow: FlowSolution
    u: FloatArray
    terminal: TerminalData
    volumes: FloatArray
    masses: FloatArray
    provenance: dict[str, Any] = field(default_factory=dict)

    @property
    def tau_T(self) -> float:
        return self.terminal.tau_T

    @property
    def times(self) -> FloatArray:
        return self.flow.times

    @property
    def taus(self) -> FloatArray:
        return self.tau_T + self.flow.T - self.flow.times

    def tau_at(self, t: float) -> float:
        return self.tau_T + self.flow.T - t

    def value(self, x: npt.ArrayLike, i: int) -> FloatArray:
        """u on slice i at fixed-grid positions."""
        return np.interp(np.asarray(x, dtype=np.float64), self.flow.x, self.u[i])

    def value_at(self, x: npt.ArrayLike, t: float) -> FloatArray:
        """u at any time in [0, T], linear between slices."""
        j, w = self.flow.bracket(t)
        return (1.0 - w) * self.value(x, j) + w * self.value(x, j + 1)

    def integral(self, i: int, x_lo: float = 0.0, x_hi: Optional[float] = None, weight: Optional[FloatArray] = None) -> float:
        """int u (times an optional nodal weight) dv over an x-interval on slice i."""
        sl = self.flow.fields_at(float(self.flow.times[i]))
        vals = self.u[i] if weight is None else self.u[i] * weight
        return weighted_integral(self.flow.m, self.flow.x, sl.f, sl.phi, vals, x_lo, x_hi)

    def ball_integral(self, i: int, pole: Pole, radius: float, weight: Optional[FloatArray] = None) -> float:
        """int u dv over the g(t_i)-ball of a given radius around a pole."""
        t = float(self.flow.times[i])
        d = self.flow.distance_at(t, "north")
        total = d[-1]
        if pole == "north":
            lo, hi = 0.0, float(np.interp(min(radius, total), d, self.flow.x))
        else:
            lo, hi = float(np.interp(max(total - radius, 0.0), d, self.flow.x)), float(self.flow.x[-1])
        return self.integral(i, lo, hi, weight)

    def to_frame(self) -> pd.DataFrame:
        rows = {"x": np.tile(self.flow.x, self.flow.n_slices)}
        rows["t"] = np.repeat(self.flow.times, self.flow.x.size)
        rows["u"] = self.u.ravel()
        return pd.DataFrame(rows)


def solve_conjugate(
    flow: FlowSolution,
    terminal_u: Union[TerminalData, npt.ArrayLike],
    tau_T: Optional[float] = None,
    steps_per_slice: int = 50,
    tol_mass: float = TOL_MASS,
) -> ConjugateHeatSolution:
    """
    Solve the conjugate heat equation backward from t = T to t = 0.

    Raises:
        SolverAccuracyError: If the discrete mass drifts beyond tol_mass on a slice
    """
    if isinstance(terminal_u, TerminalData):
        terminal = terminal_u
        if tau_T is not None and abs(tau_T - terminal.tau_T) > 1e-14 * tau_T:
            raise ValidationError("tau_T", tau_T, f"the terminal data's tau_T={terminal.tau_T}")
    else:
        if tau_T is None:
            raise ValidationError("tau_T", None, "a positive number for array terminal data")
        terminal = array_terminal(flow, terminal_u, tau_T)
    steps_per_slice = validate_int(steps_per_slice, "steps_per_slice", min_value=1)
    if flow.n_slices < 2:
        raise DomainError("solve_conjugate", "the flow needs at least two slices")

    m, x = flow.m, flow.x
    n = x.size
    u = np.empty((flow.n_slices, n))
    vols = np.empty((flow.n_slices, n))
    u[-1] = terminal.values
    vols[-1] = _terminal_volumes(flow)

    current = terminal.values.copy()
    v_old = vols[-1]
    for i in range(flow.n_slices - 1, 0, -1):
        t_hi, t_lo = float(flow.times[i]), float(flow.times[i - 1])
        dtau = (t_hi - t_lo) / steps_per_slice
        for k in range(steps_per_slice):
            t_new = t_hi - (k + 1) * dtau
            t_half = t_new + 0.5 * dtau
            mid = flow.fields_at(t_half)
            new = flow.fields_at(max(t_new, t_lo))
            cond = face_conductance(m, x, mid.f, mid.phi) * dtau
            v_new = node_volumes(m, x, new.f, new.phi)
            band = np.zeros((3, n))
            band[1] = v_new
            band[1, :-1] += cond
            band[1, 1:] += cond
            band[0, 1:] = -cond
            band[2, :-1] = -cond
            current = solve_banded((1, 1), band, v_old * current)
            v_old = v_new
        u[i - 1] = current
        vols[i - 1] = v_old

    masses = np.einsum("ij,ij->i", vols, u)
    drift = np.abs(masses - 1.0)
    worst = int(np.argmax(drift))
    if drift[worst] > tol_mass:
        raise SolverAccuracyError("solve_conjugate", worst, float(drift[worst]), tol_mass)
    if np.any(u[:-1] <= 0):
        logger.warning("conjugate solution underflows to zero on %d nodes", int(np.sum(u[:-1] <= 0)))
    solution = ConjugateHeatSolution(
        flow,
        u,
        terminal,
        vols,
        masses,
        {
            "scheme": "finite-volume implicit Euler",
            "steps_per_slice": steps_per_slice,
            "terminal": terminal.kind,
            "terminal_factor": terminal.factor,
            "max_mass_drift": float(drift[worst]),
        },
    )
    logger.info(
        "conjugate solve: %d slices, tau_T=%.4g, max mass drift %.3e",
        flow.n_slices,
        terminal.tau_T,
        float(drift[worst]),
    )
    return solution


# ---------------------------------------------------------------------------
# Harnack fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HarnackFields:
    """
    f and v on every slice; entries outside the mask are NaN.

    box_residual holds (d_tau - Delta + R) v + 2 tau |Rc + Hess f - g/(2 tau)|^2 u
    on interior slices.
    """

    times: FloatArray
    taus: FloatArray
    f: FloatArray
    v: FloatArray
    u: FloatArray
    mask: npt.NDArray[np.bool_]
    mu: float
    box_residual: FloatArray

    def max_v_ratio(self, t_max: Optional[float] = None) -> float:
        """max v / max u over the masked grid for t <= t_max."""
        rows = np.ones(self.times.size, dtype=bool) if t_max is None else self.times <= t_max + 1e-14
        v = np.where(self.mask, self.v, -np.inf)[rows]
        return float(np.max(v) / np.max(self.u[rows]))

    def max_abs_v_ratio(self, t_max: Optional[float] = None) -> float:
        rows = np.ones(self.times.size, dtype=bool) if t_max is None else self.times <= t_max + 1e-14
        v = np.where(self.mask, np.abs(self.v), 0.0)[rows]
        return float(np.max(v) / np.max(self.u[rows]))

    def box_residual_ratio(self) -> float:
        finite = np.isfinite(self.box_residual)
        if not np.any(finite):
            return 0.0
        return float(np.max(np.abs(self.box_residual[finite])) / np.max(self.u))

    @property
    def masked_fraction(self) -> float:
        return float(1.0 - np.mean(self.mask))

    def to_frame(self, x: FloatArray) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "x": np.tile(x, self.times.size),
                "t": np.repeat(self.times, x.size),
                "f": self.f.ravel(),
                "v": self.v.ravel(),
            }
        )


def _erode(mask: npt.NDArray[np.bool_], width: int = 2) -> npt.NDArray[np.bool_]:
    out = mask.copy()
    for k in range(1, width + 1):
        out[k:] &= mask[:-k]
        out[:-k] &= mask[k:]
    return out


def compute_harnack_fields(chs: ConjugateHeatSolution, mu: float, u_floor: float = U_FLOOR) -> HarnackFields:
    """f, v and the box-identity residual on the masked grid."""
    flow = chs.flow
    m, x = flow.m, flow.x
    n_t = flow.n_slices
    taus = chs.taus
    f_all = np.full((n_t, x.size), np.nan)
    v_all = np.full((n_t, x.size), np.nan)
    mask = np.zeros((n_t, x.size), dtype=bool)
    hess_sq = np.full((n_t, x.size), np.nan)

    for i in range(n_t):
        sl = flow.fields_at(float(flow.times[i]))
        curv = flow.curvatures[i]
        tau = float(taus[i])
        u = chs.u[i]
        ok = _erode(u >= u_floor)
        f = -np.log(np.maximum(u, u_floor)) - 0.5 * m * math.log(4.0 * math.pi * tau)
        fr, frr, lap_f = radial_operators(m, flow.topology, x, sl.f, sl.phi, f)
        v = (tau * (2.0 * lap_f - fr**2 + sl.R) + f - m - mu) * u
        f_all[i, ok] = f[ok]
        v_all[i, ok] = v[ok]
        mask[i] = ok

        h = float(x[1] - x[0])
        fx, _ = central_derivatives(sl.f, h, "odd", "odd" if flow.topology == "sphere" else "extrapolate")
        with np.errstate(divide="ignore", invalid="ignore"):
            sph = fr * (fx / sl.phi) / sl.f
        sph[0] = frr[0]
        if flow.topology == "sphere":
            sph[-1] = frr[-1]
        rad_term = curv.ric_rad + frr - 0.5 / tau
        sph_term = curv.ric_sph + sph - 0.5 / tau
        hess_sq[i] = rad_term**2 + (m - 1) * sph_term**2

    box = np.full((n_t, x.size), np.nan)
    for i in range(1, n_t - 1):
        ok = mask[i - 1] & mask[i] & mask[i + 1]
        if not np.any(ok):
            continue
        sl = flow.fields_at(float(flow.times[i]))
        dv_dtau = (v_all[i - 1] - v_all[i + 1]) / (taus[i - 1] - taus[i + 1])
        v_filled = np.where(mask[i], v_all[i], 0.0)
        _, _, lap_v = radial_operators(m, flow.topology, x, sl.f, sl.phi, v_filled)
        res = dv_dtau - lap_v + sl.R * v_filled + 2.0 * float(taus[i]) * hess_sq[i] * chs.u[i]
        ok = _erode(ok)
        box[i, ok] = res[ok]

    masked = int(np.sum(~mask))
    if masked:
        logger.warning("Harnack fields: %d grid points below the u floor are masked", masked)
    fields = HarnackFields(np.array(flow.times), taus, f_all, v_all, chs.u, mask, mu, box)
    logger.info("Harnack fields: max v/max u = %.3e", fields.max_v_ratio())
    return fields


@dataclass(frozen=True)
class TerminalConsistency:
    """v at t = T from the minimizer's own discretization."""

    v_max: float
    u_max: float
    scale: float

    def passed(self, tol_el: float) -> bool:
        return self.v_max <= 10.0 * tol_el * self.u_max * self.scale


def terminal_consistency(result: MuResult) -> TerminalConsistency:
    """
    v(., T) = phi * (Euler-Lagrange residual) on the interior of the minimizer's support.

    The scale converts the solver's relative residual back to absolute units.
    """
    phi = result.minimizer.values
    interior = np.zeros(phi.size, dtype=bool)
    interior[1:-1] = (phi[1:-1] > 0) & (phi[:-2] > 0) & (phi[2:] > 0)
    v = np.abs(phi * result.residual_field)[interior]
    scale = result.residual_norm / result.residual if result.residual > 0 else 1.0
    return TerminalConsistency(float(np.max(v)) if v.size else 0.0, float(np.max(phi**2)), scale)


# ---------------------------------------------------------------------------
# curve-wise Harnack inequalities
# ---------------------------------------------------------------------------


Curve = Callable[[FloatArray], FloatArray]


@dataclass(frozen=True)
class CurveHarnackReport:
    """Per-tau margins of the differential Harnack inequality along a curve."""

    taus: FloatArray
    lhs: FloatArray
    rhs: FloatArray

    @property
    def margins(self) -> FloatArray:
        return self.rhs - self.lhs

    @property
    def min_margin(self) -> float:
        finite = self.margins[np.isfinite(self.margins)]
        return float(np.min(finite)) if finite.size else math.inf

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"tau": self.taus, "lhs": self.lhs, "rhs": self.rhs, "margin": self.margins})


def _f_along(chs: ConjugateHeatSolution, i: int, xs: float, u_floor: float) -> float:
    u = chs.u[i]
    if np.interp(xs, chs.flow.x, u) < u_floor:
        return math.nan
    tau = float(chs.taus[i])
    f = -np.log(np.maximum(u, u_floor)) - 0.5 * chs.flow.m * math.log(4.0 * math.pi * tau)
    return float(CubicSpline(chs.flow.x, f)(xs))


def differential_harnack_along_curve(
    chs: ConjugateHeatSolution, mu: float, curve: Curve, u_floor: float = U_FLOOR
) -> CurveHarnackReport:
    """
    Margins of d/dtau(sqrt(tau) f(gamma)) <= sqrt(tau)(R + |gamma'|^2)/2 + mu/(2 sqrt(tau)).

    curve maps tau to the fixed radial coordinate x; derivatives are centred
    differences over the solution's slices.
    """
    flow = chs.flow
    taus = chs.taus[::-1]
    idx = np.arange(flow.n_slices)[::-1]
    xs = np.asarray(curve(taus), dtype=np.float64)
    if xs.shape != taus.shape:
        raise ValidationError("curve", xs.shape, f"{taus.size} positions")
    if np.any(xs < 0) or np.any(xs > flow.x[-1]):
        raise DomainError("differential_harnack_along_curve", "curve leaves the grid")
    g = np.array([math.sqrt(t) * _f_along(chs, i, xv, u_floor) for t, i, xv in zip(taus, idx, xs)])
    lhs = np.full(taus.size, np.nan)
    rhs = np.full(taus.size, np.nan)
    for j in range(1, taus.size - 1):
        dtau = taus[j + 1] - taus[j - 1]
        lhs[j] = (g[j + 1] - g[j - 1]) / dtau
        sl = flow.fields_at(float(flow.times[idx[j]]))
        phi = float(np.interp(xs[j], flow.x, sl.phi))
        R = float(np.interp(xs[j], flow.x, sl.R))
        speed2 = (phi * (xs[j + 1] - xs[j - 1]) / dtau) ** 2
        rt = math.sqrt(taus[j])
        rhs[j] = 0.5 * rt * (R + speed2) + mu / (2.0 * rt)
    report = CurveHarnackReport(taus, lhs, rhs)
    logger.info("differential Harnack along curve: min margin %.3e", report.min_margin)
    return report


@dataclass(frozen=True)
class IntegratedHarnack:
    """Both sides of the integrated Harnack inequality in log form."""

    log_lhs: float
    log_rhs: float
    action: float

    @property
    def margin(self) -> float:
        return self.log_lhs - self.log_rhs


def integrated_harnack(
    chs: ConjugateHeatSolution,
    mu: float,
    curve: Curve,
    endpoints: tuple[float, float],
    n_sigma: int = 128,
) -> IntegratedHarnack:
    """
    log u(y0, 0) against the lower bound built from u(x0, T), mu and the action of the curve.

    endpoints is (x0, y0); the curve must satisfy curve(tau_T) = x0 and curve(tau_T + T) = y0.
    """
    from .reduced import SpaceTimeCurve, action

    flow = chs.flow
    x0, y0 = endpoints
    tau_T, tau_0 = chs.tau_T, chs.tau_T + flow.T
    ends = np.asarray(curve(np.array([tau_T, tau_0])), dtype=np.float64)
    scale = max(1.0, abs(x0), abs(y0))
    if abs(ends[0] - x0) > 1e-9 * scale or abs(ends[1] - y0) > 1e-9 * scale:
        raise ValidationError("curve", ends, f"endpoints ({x0}, {y0})")
    sig = np.linspace(math.sqrt(tau_T), math.sqrt(tau_0), n_sigma + 1)
    path = SpaceTimeCurve.radial(sig, np.asarray(curve(sig**2), dtype=np.float64), flow.T, tau_T)
    L = action(flow, path)

    m = flow.m
    u_y0 = float(chs.value(y0, 0))
    u_x0 = float(chs.value(x0, flow.n_slices - 1))
    ratio = math.sqrt(tau_T / tau_0)
    log_rhs = (
        -0.5 * m * math.log(4.0 * math.pi * tau_0)
        + (ratio - 1.0) * mu
        - L / (2.0 * math.sqrt(tau_0))
        + ratio * (0.5 * m * math.log(4.0 * math.pi * tau_T) + math.log(u_x0))
    )
    result = IntegratedHarnack(math.log(u_y0), log_rhs, L)
    logger.info("integrated Harnack: margin %.3e", result.margin)
    return result


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def gradient_monitor(chs: ConjugateHeatSolution, u_floor: float = U_FLOOR) -> pd.DataFrame:
    """sup |grad sqrt u| and sup |grad u|^2 / u on every slice."""
    flow = chs.flow
    h = float(flow.x[1] - flow.x[0])
    rows = []
    for i, t in enumerate(flow.times):
        sl = flow.fields_at(float(t))
        u = chs.u[i]
        root_x, _ = central_derivatives(np.sqrt(np.maximum(u, 0.0)), h, "even", _right_parity(flow.topology))
        ux, _ = central_derivatives(u, h, "even", _right_parity(flow.topology))
        ok = u >= u_floor
        grad_root = np.abs(root_x) / sl.phi
        fisher = (ux / sl.phi) ** 2 / np.maximum(u, u_floor)
        rows.append(
            {
                "t": float(t),
                "tau": float(chs.taus[i]),
                "sup_grad_sqrt_u": float(np.max(grad_root[ok])) if np.any(ok) else math.nan,
                "sup_fisher": float(np.max(fisher[ok])) if np.any(ok) else math.nan,
            }
        )
    return pd.DataFrame(rows)


def monotonicity_series(
    flow: FlowSolution,
    tau_T: float,
    options: Optional[SolverOptions] = None,
    slices: Optional[list[int]] = None,
) -> pd.DataFrame:
    """mu(g(t), tau_T + T - t) on the whole manifold along the flow's slices."""
    tau_T = validate_positive(tau_T, "tau_T")
    picks = list(range(flow.n_slices)) if slices is None else slices
    rows = []
    for i in picks:
        geom = flow.geometry_at(i)
        t = float(flow.times[i])
        tau = tau_T + flow.T - t
        res = minimize_mu(geom, "scalar", RadialDomain(0.0, geom.s_max), tau, options)
        rows.append({"t": t, "tau": tau, "mu": res.mu, "converged": res.converged})
    return pd.DataFrame(rows)
