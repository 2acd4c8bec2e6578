# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Localized W-functional, its minimization, and symmetrization.

For a radial domain Omega of a RadialGeometry and tau > 0,

    W(phi, tau) = -m - (m/2) log(4 pi tau)
                  + int tau (a phi^2 + 4 |grad phi|^2) - phi^2 log phi^2 dv

over nonnegative radial phi vanishing on the walls of Omega with int phi^2 dv = 1.
mu is the infimum of W and nu the infimum of mu(s) over s in (0, tau]. The
a-field is either zero (the log-Sobolev variant) or the scalar curvature.

Trial functions are continuous piecewise-linear on a uniform grid of the
domain with spacing close to the geometry's ds; integrals use five-point
Gauss-Legendre against the warped volume density. Every computed mu is therefore
the exact value of W at an admissible function, an upper bound for the radial
infimum.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from collections.abc import Iterable, MutableMapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Optional

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy.linalg import cho_solve_banded, cholesky_banded

from .exceptions import DomainError, ValidationError
from .geometry import (
    RadialDomain,
    RadialGeometry,
    euclidean,
    unit_ball_constant,
    unit_sphere_area,
)
from .validation import validate_choice, validate_int, validate_positive

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
AField = Literal["zero", "scalar"]

_XI, _WQ = np.polynomial.legendre.leggauss(5)
_N0 = 0.5 * (1.0 - _XI)
_N1 = 0.5 * (1.0 + _XI)

NORMALIZATION_TOL = 1e-10
LEVELS = 8192


def entropy_density(x: npt.ArrayLike) -> FloatArray:
    """x^2 log x^2, continuously extended by 0 at x = 0."""
    x = np.asarray(x, dtype=np.float64)
    sq = x * x
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(sq > 0, sq * np.log(sq), 0.0)


def _entropy_slope(x: FloatArray) -> FloatArray:
    # clamped log; used for gradients only
    sq = np.maximum(x * x, 1e-300)
    return 2.0 * x * (np.log(sq) + 1.0)


@dataclass(frozen=True, eq=False)
class DomainGrid:
    """Piecewise-linear finite elements on a radial domain."""

    geom: RadialGeometry
    domain: RadialDomain
    nodes: FloatArray
    free: npt.NDArray[np.bool_]

    @property
    def h(self) -> float:
        return float(self.nodes[1] - self.nodes[0])

    @property
    def n_cells(self) -> int:
        return int(self.nodes.size - 1)

    @cached_property
    def quad_points(self) -> FloatArray:
        mid = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        return mid[:, None] + 0.5 * self.h * _XI[None, :]

    @cached_property
    def weights(self) -> FloatArray:
        """Quadrature weights times the volume density, shape (cells, 5)."""
        return 0.5 * self.h * _WQ[None, :] * self.geom.density_at(self.quad_points)

    @cached_property
    def stiffness(self) -> FloatArray:
        """Per-cell conductance int_e w / h^2."""
        return self.weights.sum(axis=1) / self.h**2

    @cached_property
    def lumped_mass(self) -> FloatArray:
        return self.assemble(self.weights)

    def curvature_weights(self, a_field: AField) -> FloatArray:
        if a_field == "zero":
            return np.zeros_like(self.weights)
        return self.weights * self.geom.curvature_at(self.quad_points)

    def at_quad(self, values: FloatArray) -> FloatArray:
        return values[:-1, None] * _N0[None, :] + values[1:, None] * _N1[None, :]

    def assemble(self, per_quad: FloatArray) -> FloatArray:
        """sum_q per_quad N_j for every node j."""
        out = np.zeros(self.nodes.size)
        out[:-1] += per_quad @ _N0
        out[1:] += per_quad @ _N1
        return out

    def mass_apply(self, values: FloatArray, weights: Optional[FloatArray] = None) -> FloatArray:
        w = self.weights if weights is None else weights
        return self.assemble(w * self.at_quad(values))

    def stiffness_apply(self, values: FloatArray) -> FloatArray:
        flux = self.stiffness * np.diff(values)
        out = np.zeros(self.nodes.size)
        out[:-1] -= flux
        out[1:] += flux
        return out

    def mass(self, values: FloatArray) -> float:
        return float(np.sum(self.weights * self.at_quad(values) ** 2))

    def dirichlet(self, values: FloatArray) -> float:
        return float(np.sum(self.stiffness * np.diff(values) ** 2))

    def tridiagonal(self, weights: Optional[FloatArray] = None) -> tuple[FloatArray, FloatArray]:
        """Diagonal and off-diagonal of the consistent mass matrix."""
        w = self.weights if weights is None else weights
        diag = np.zeros(self.nodes.size)
        diag[:-1] += w @ (_N0 * _N0)
        diag[1:] += w @ (_N1 * _N1)
        return diag, w @ (_N0 * _N1)

    def aligned_with(self, other: DomainGrid) -> bool:
        """Whether every node of self is a node of other with the same spacing."""
        if abs(self.h - other.h) > 1e-12 * other.h:
            return False
        offset = (self.nodes[0] - other.nodes[0]) / other.h
        return abs(offset - round(offset)) < 1e-9 and self.nodes[0] >= other.nodes[0] - 1e-12 and (
            self.nodes[-1] <= other.nodes[-1] + 1e-12
        )


def build_grid(geom: RadialGeometry, domain: RadialDomain, min_cells: int = 16) -> DomainGrid:
    """
    Uniform element grid on a domain with spacing close to ds.

    Raises:
        DomainError: If the domain is shorter than 5 ds or leaves the geometry
    """
    if domain.s_lo < -1e-12 or domain.s_hi > geom.s_max * (1 + 1e-12):
        raise DomainError("build_grid", f"domain [{domain.s_lo}, {domain.s_hi}] leaves the geometry")
    if domain.length < 5.0 * geom.ds * (1 - 1e-9):
        raise DomainError(
            "build_grid",
            f"domain length {domain.length:.4g} is below 5 ds = {5 * geom.ds:.4g}",
            "Refine the geometry grid or enlarge the domain",
        )
    n = max(round(domain.length / geom.ds), min_cells)
    nodes = np.linspace(domain.s_lo, domain.s_hi, n + 1)
    left, right = domain.free_ends(geom)
    free = np.ones(nodes.size, dtype=bool)
    free[0] = left
    free[-1] = right
    return DomainGrid(geom, domain, nodes, free)


@dataclass(frozen=True, eq=False)
class TrialFunction:
    """A nonnegative piecewise-linear radial function on a domain grid."""

    grid: DomainGrid
    values: FloatArray

    @property
    def domain(self) -> RadialDomain:
        return self.grid.domain

    @property
    def nodes(self) -> FloatArray:
        return self.grid.nodes

    @property
    def mass(self) -> float:
        return self.grid.mass(self.values)

    def __call__(self, s: npt.ArrayLike) -> FloatArray:
        """Values at arbitrary arc length, zero outside the domain."""
        s = np.asarray(s, dtype=np.float64)
        return np.interp(s, self.nodes, self.values, left=0.0, right=0.0)

    def extend(self, grid: DomainGrid) -> TrialFunction:
        """Extension by zero onto an aligned larger grid."""
        if not self.grid.aligned_with(grid):
            raise DomainError("TrialFunction.extend", "grids are not aligned")
        values = np.zeros(grid.nodes.size)
        start = round((self.nodes[0] - grid.nodes[0]) / grid.h)
        values[start : start + self.values.size] = self.values
        return TrialFunction(grid, values)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"s": self.nodes, "phi": self.values})


def normalize(grid: DomainGrid, values: npt.ArrayLike) -> TrialFunction:
    """Take |.|, zero the walls and scale to unit L^2 mass."""
    v = np.abs(np.array(values, dtype=np.float64))
    if v.shape != grid.nodes.shape:
        raise ValidationError("trial function", v.shape, f"{grid.nodes.size} nodal values")
    v[~grid.free] = 0.0
    mass = grid.mass(v)
    if not mass > 0:
        raise ValidationError("trial function", v, "a function with positive mass")
    return TrialFunction(grid, v / math.sqrt(mass))


@dataclass(frozen=True)
class WValue:
    """The W-functional split into its pieces."""

    constant: float
    potential: float
    dirichlet: float
    entropy: float

    @property
    def total(self) -> float:
        return self.constant + self.potential + self.dirichlet + self.entropy


def _w_parts(grid: DomainGrid, a_weights: FloatArray, values: FloatArray, tau: float) -> WValue:
    m = grid.geom.m
    q = grid.at_quad(values)
    return WValue(
        constant=-m - 0.5 * m * math.log(4.0 * math.pi * tau),
        potential=tau * float(np.sum(a_weights * q * q)),
        dirichlet=4.0 * tau * grid.dirichlet(values),
        entropy=-float(np.sum(grid.weights * entropy_density(q))),
    )


def eval_W(geom: RadialGeometry, a_field: AField, phi: TrialFunction, tau: float) -> WValue:
    """
    Evaluate W on a normalized trial function.

    Raises:
        ValidationError: If phi is not normalized or tau <= 0
    """
    tau = validate_positive(tau, "tau")
    validate_choice(a_field, "a_field", ("zero", "scalar"))
    if phi.grid.geom is not geom:
        raise ValidationError("trial function", "foreign grid", "a function built on this geometry")
    if np.any(phi.values < 0):
        raise ValidationError("trial function", phi.values, "nonnegative values")
    if abs(phi.mass - 1.0) > NORMALIZATION_TOL:
        raise ValidationError(
            "trial function", phi.mass, "unit L^2 mass", "Normalize with entropy.normalize()"
        )
    return _w_parts(phi.grid, phi.grid.curvature_weights(a_field), phi.values, tau)


# ---------------------------------------------------------------------------
# minimization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverOptions:
    """Knobs of the projected gradient solver."""

    tol_el: float = 1e-8
    max_iters: int = 50_000
    memory: int = 10
    armijo: float = 1e-4
    initial_step: float = 0.5


@dataclass(frozen=True)
class MuResult:
    """
    A minimized W-functional.

    Attributes:
        mu: Value of W at the minimizer
        minimizer: The normalized minimizing trial function
        tau: Scale parameter
        a_field: "zero" or "scalar"
        residual: Relative Euler-Lagrange residual
        residual_norm: Weighted L^2 norm of the Euler-Lagrange residual
        residual_field: Nodal residual (strong form) on the domain grid
        iterations: Number of descent steps taken
        converged: Whether residual <= tol_el
        parts: The W decomposition at the minimizer
    """

    mu: float
    minimizer: TrialFunction
    tau: float
    a_field: str
    residual: float
    residual_norm: float
    residual_field: FloatArray
    iterations: int
    converged: bool
    parts: WValue

    def summary(self) -> dict[str, object]:
        return {
            "mu": self.mu,
            "tau": self.tau,
            "a_field": self.a_field,
            "residual": self.residual,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "domain": [self.minimizer.domain.s_lo, self.minimizer.domain.s_hi],
        }


class _Problem:
    """Discrete W with its projected gradient on a fixed grid and tau."""

    def __init__(self, grid: DomainGrid, a_field: AField, tau: float) -> None:
        self.grid = grid
        self.tau = tau
        self.a_weights = grid.curvature_weights(a_field)
        self.idx = np.flatnonzero(grid.free)
        self.V = grid.lumped_mass[self.idx]

        diag_m, off_m = grid.tridiagonal()
        kap = grid.stiffness
        diag_k = np.zeros(grid.nodes.size)
        diag_k[:-1] += kap
        diag_k[1:] += kap
        diag = (4.0 * tau * diag_k + diag_m)[self.idx]
        off = (-4.0 * tau * kap + off_m)[self.idx[:-1]]
        band = np.zeros((2, self.idx.size))
        band[0, 1:] = off
        band[1, :] = diag
        self._band = band
        self._chol = cholesky_banded(band)

    def precondition(self, r: FloatArray) -> FloatArray:
        return np.asarray(cho_solve_banded((self._chol, False), r), dtype=np.float64)

    def apply_p(self, v: FloatArray) -> FloatArray:
        out = self._band[1] * v
        out[:-1] += self._band[0, 1:] * v[1:]
        out[1:] += self._band[0, 1:] * v[:-1]
        return out

    def value(self, values: FloatArray) -> float:
        return _w_parts(self.grid, self.a_weights, values, self.tau).total

    def residual(self, values: FloatArray) -> tuple[FloatArray, float, float, float]:
        """Projected half-gradient on free nodes, its norm, relative size and Mphi."""
        g = self.grid
        pot = self.tau * g.mass_apply(values, self.a_weights)
        kin = 4.0 * self.tau * g.stiffness_apply(values)
        ent = 0.5 * g.assemble(g.weights * _entropy_slope(g.at_quad(values)))
        mphi = g.mass_apply(values)
        grad = (pot + kin - ent)[self.idx]
        lam = float(values[self.idx] @ grad) / float(values[self.idx] @ mphi[self.idx])
        r = grad - lam * mphi[self.idx]

        def norm(v: FloatArray) -> float:
            return math.sqrt(float(np.sum(v * v / self.V)))

        res = norm(r)
        scale = norm(pot[self.idx]) + norm(kin[self.idx]) + norm(ent[self.idx]) + abs(lam) * norm(mphi[self.idx])
        return r, res, res / max(scale, 1e-300), lam

    def embed(self, free_values: FloatArray) -> FloatArray:
        out = np.zeros(self.grid.nodes.size)
        out[self.idx] = free_values
        return out


def initial_guess(grid: DomainGrid, tau: float) -> TrialFunction:
    """Gaussian of width sqrt(tau) at the pole end (or the middle) times the first Dirichlet mode."""
    y = grid.nodes
    lo, hi = grid.domain.s_lo, grid.domain.s_hi
    L = hi - lo
    left, right = bool(grid.free[0]), bool(grid.free[-1])
    if left and right:
        center, mode = lo, np.ones_like(y)
    elif left:
        center, mode = lo, np.cos(0.5 * np.pi * (y - lo) / L)
    elif right:
        center, mode = hi, np.cos(0.5 * np.pi * (hi - y) / L)
    else:
        center, mode = 0.5 * (lo + hi), np.sin(np.pi * (y - lo) / L)
    values = np.exp(-((y - center) ** 2) / (8.0 * tau)) * np.maximum(mode, 0.0)
    return normalize(grid, values)


def minimize_mu(
    geom: RadialGeometry,
    a_field: AField,
    domain: RadialDomain,
    tau: float,
    options: Optional[SolverOptions] = None,
    start: Optional[TrialFunction] = None,
) -> MuResult:
    """
    Minimize W over normalized trial functions on a domain.

    Preconditioned projected gradient on the mass sphere (preconditioner
    4 tau K + M) with Barzilai-Borwein steps and a nonmonotone Armijo safeguard
    over the last few values. An unconverged result is returned flagged.
    """
    tau = validate_positive(tau, "tau")
    validate_choice(a_field, "a_field", ("zero", "scalar"))
    opts = options or SolverOptions()
    grid = build_grid(geom, domain)
    prob = _Problem(grid, a_field, tau)

    phi = (start if start is not None and start.grid is grid else initial_guess(grid, tau)).values
    w = prob.value(phi)
    r, res, rel, _ = prob.residual(phi)
    history: deque[float] = deque([w], maxlen=opts.memory)
    alpha = opts.initial_step
    converged = rel <= opts.tol_el
    it = 0
    while not converged and it < opts.max_iters:
        it += 1
        d = prob.precondition(r)
        phi_free = phi[prob.idx]
        mphi = grid.mass_apply(phi)[prob.idx]
        d = d - float(mphi @ d) * phi_free
        slope = float(r @ d)
        if not slope > 0:
            logger.debug("non-descent direction at iteration %d", it)
            break
        ref = max(history)
        for _ in range(60):
            trial = prob.embed(np.abs(phi_free - alpha * d))
            mass = grid.mass(trial)
            trial /= math.sqrt(mass)
            w_trial = prob.value(trial)
            if w_trial <= ref - 2.0 * opts.armijo * alpha * slope:
                break
            alpha *= 0.5
        else:
            logger.debug("line search stalled at iteration %d", it)
            break
        r_new, res, rel, _ = prob.residual(trial)
        s = (trial - phi)[prob.idx]
        y = r_new - r
        sy = float(s @ y)
        alpha = float(s @ prob.apply_p(s)) / sy if sy > 0 else 2.0 * alpha
        alpha = min(max(alpha, 1e-12), 1e6)
        phi, r, w = trial, r_new, w_trial
        history.append(w)
        converged = rel <= opts.tol_el
        if it % 1000 == 0:
            logger.debug("mu iteration %d: W=%.12g rel residual=%.3e", it, w, rel)

    _, res, rel, lam = prob.residual(phi)
    field_ = np.zeros(grid.nodes.size)
    field_[prob.idx] = r / prob.V
    minimizer = TrialFunction(grid, phi)
    parts = _w_parts(grid, prob.a_weights, phi, tau)
    result = MuResult(parts.total, minimizer, tau, a_field, rel, res, field_, it, converged, parts)
    if converged:
        logger.info("mu=%.10g on [%.4g, %.4g] tau=%.4g (%d iterations)", result.mu, domain.s_lo, domain.s_hi, tau, it)
    else:
        logger.warning(
            "mu solve did not converge on [%.4g, %.4g] tau=%.4g: residual %.3e after %d iterations",
            domain.s_lo,
            domain.s_hi,
            tau,
            rel,
            it,
        )
    return result


@dataclass(frozen=True)
class NuResult:
    """nu as the minimum of mu(s) over a sampled s-grid in (0, tau]."""

    nu: float
    tau: float
    samples: FloatArray
    mu_values: FloatArray
    argmin: float
    refinement_depth: int
    results: tuple[MuResult, ...] = field(repr=False, default=())

    @property
    def approximate(self) -> bool:
        return not all(r.converged for r in self.results)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"s": self.samples, "mu": self.mu_values})


def nu_sample_grid(tau: float, n_points: int = 24) -> FloatArray:
    """Geometric grid from 1e-3 tau to tau."""
    return np.geomspace(1e-3 * tau, tau, n_points)


def compute_nu(
    geom: RadialGeometry,
    a_field: AField,
    domain: RadialDomain,
    tau: float,
    n_points: int = 24,
    extra_samples: Iterable[float] = (),
    jobs: int = 1,
    options: Optional[SolverOptions] = None,
    cache: Optional[MutableMapping[float, MuResult]] = None,
) -> NuResult:
    """
    nu over a geometric s-grid with one refinement pass around the argmin.

    Ties are broken toward the smaller s. Solves are independent and may run
    in a thread pool; results keep the grid order. A cache keyed by s is
    consulted before solving and filled afterwards; it must belong to the same
    (geometry, a-field, domain).
    """
    tau = validate_positive(tau, "tau")
    n_points = validate_int(n_points, "n_points", min_value=2)
    jobs = validate_int(jobs, "jobs", min_value=1)
    extra = [float(s) for s in extra_samples if 0 < s <= tau * (1 + 1e-12)]
    known: MutableMapping[float, MuResult] = {} if cache is None else cache

    def solve_all(samples: Sequence[float]) -> list[MuResult]:
        missing = [s for s in samples if s not in known]
        if jobs == 1:
            fresh = [minimize_mu(geom, a_field, domain, s, options) for s in missing]
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                fresh = list(pool.map(lambda s: minimize_mu(geom, a_field, domain, s, options), missing))
        known.update(zip(missing, fresh))
        return [known[s] for s in samples]

    base = sorted(set(nu_sample_grid(tau, n_points).tolist()) | set(extra))
    results = dict(zip(base, solve_all(base)))

    ordered = sorted(results)
    j = int(np.argmin([results[s].mu for s in ordered]))
    refine = []
    if j > 0:
        refine.append(math.sqrt(ordered[j - 1] * ordered[j]))
    if j < len(ordered) - 1:
        refine.append(math.sqrt(ordered[j] * ordered[j + 1]))
    refine = [s for s in refine if s not in results]
    results.update(zip(refine, solve_all(refine)))

    samples = np.array(sorted(results))
    mus = np.array([results[s].mu for s in samples])
    best = int(np.argmin(mus))
    nu = NuResult(
        float(mus[best]),
        tau,
        samples,
        mus,
        float(samples[best]),
        1,
        tuple(results[s] for s in samples),
    )
    if nu.approximate:
        logger.warning("nu on [%.4g, %.4g] tau=%.4g is approximate", domain.s_lo, domain.s_hi, tau)
    logger.info("nu=%.10g at s=%.4g (tau=%.4g, %d samples)", nu.nu, nu.argmin, tau, samples.size)
    return nu


# ---------------------------------------------------------------------------
# symmetrization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rearrangement:
    """
    Symmetric decreasing rearrangement h(|y|) on a Euclidean ball.

    h is piecewise linear in r through the points (radii, levels).
    """

    m: int
    radii: FloatArray
    levels: FloatArray
    ball_radius: float
    level_volumes: FloatArray
    monotone_fixes: int

    def __call__(self, r: npt.ArrayLike) -> FloatArray:
        return np.interp(np.asarray(r, dtype=np.float64), self.radii, self.levels, right=0.0)

    def _quadrature(self) -> tuple[FloatArray, FloatArray]:
        lo, hi = self.radii[:-1], self.radii[1:]
        pts = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * _XI[None, :]
        w = 0.5 * (hi - lo)[:, None] * _WQ[None, :] * unit_sphere_area(self.m) * pts ** (self.m - 1)
        return pts, w

    def l2_mass(self) -> float:
        pts, w = self._quadrature()
        return float(np.sum(w * self(pts) ** 2))

    def entropy_integral(self) -> float:
        """int h^2 log h^2."""
        pts, w = self._quadrature()
        return float(np.sum(w * entropy_density(self(pts))))

    def dirichlet(self) -> float:
        """int |grad h|^2 over the Euclidean ball, exact for piecewise-linear h."""
        dr = np.diff(self.radii)
        keep = dr > 0
        slope = np.diff(self.levels)[keep] / dr[keep]
        shells = unit_sphere_area(self.m) * np.diff(self.radii**self.m)[keep] / self.m
        return float(np.sum(slope**2 * shells))

    def superlevel_volume(self, t: npt.ArrayLike) -> FloatArray:
        """|{h >= t}| on the Euclidean ball."""
        t = np.asarray(t, dtype=np.float64)
        order = np.argsort(self.levels)
        r = np.interp(t, self.levels[order], self.radii[order])
        return unit_ball_constant(self.m) * r**self.m

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"r": self.radii, "h": self.levels})


def superlevel_volumes(phi: TrialFunction, levels: FloatArray) -> FloatArray:
    """Exact |{phi >= t}| of a piecewise-linear function for each level t."""
    grid = phi.grid
    geom = grid.geom
    a, b = phi.values[:-1], phi.values[1:]
    ya, yb = grid.nodes[:-1], grid.nodes[1:]
    t = levels[:, None]
    lo_val, hi_val = np.minimum(a, b), np.maximum(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = ya + (t - a) / (b - a) * (yb - ya)
    cross = np.where(np.isfinite(cross), cross, ya)
    rising = b >= a
    start = np.where(rising, cross, ya)
    stop = np.where(rising, yb, cross)
    start = np.where(t <= lo_val, ya, start)
    stop = np.where(t <= lo_val, yb, stop)
    empty = t > hi_val
    start = np.where(empty, ya, np.clip(start, ya, yb))
    stop = np.where(empty, ya, np.clip(stop, ya, yb))
    vol = geom.cumulative_volume(stop) - geom.cumulative_volume(start)
    return np.asarray(vol.sum(axis=1), dtype=np.float64)


def equimeasurable_rearrangement(
    geom: RadialGeometry, domain: RadialDomain, phi: TrialFunction
) -> Rearrangement:
    """
    Radial decreasing h on the Euclidean ball of volume |domain| with
    |{phi >= t}| = |{h >= t}| on a shared level grid.

    Non-monotone level volumes from quadrature noise are repaired and counted.
    """
    if phi.grid.geom is not geom or phi.domain != domain:
        raise ValidationError("trial function", "foreign grid", "a function on this domain")
    m = geom.m
    top = float(np.max(phi.values))
    levels = np.unique(np.concatenate([phi.values, np.linspace(0.0, top, LEVELS)]))[::-1]
    levels = levels[levels > 0]
    vols = superlevel_volumes(phi, levels)
    total = geom.cumulative_volume(domain.s_hi) - geom.cumulative_volume(domain.s_lo)
    fixed = np.maximum.accumulate(vols)
    fixes = int(np.count_nonzero(fixed > vols))
    if fixes:
        logger.debug("re-monotonized %d level volumes", fixes)
    omega = unit_ball_constant(m)
    radii = (fixed / omega) ** (1.0 / m)
    ball_radius = float((total / omega) ** (1.0 / m))
    radii = np.concatenate([[0.0], radii, [ball_radius]])
    values = np.concatenate([[top], levels, [0.0]])
    return Rearrangement(m, radii, values, ball_radius, fixed, fixes)


def dirichlet_comparison(
    geom: RadialGeometry, phi: TrialFunction, h: Rearrangement, lam: float
) -> float:
    """Signed margin of int |grad phi|^2 dv >= lam^2 int |grad h|^2 over the Euclidean ball."""
    lam = validate_positive(lam, "lambda")
    return phi.grid.dirichlet(phi.values) - lam * lam * h.dirichlet()


@dataclass(frozen=True)
class SymmetrizationReport:
    """
    Chain mu_bar(Omega, tau) >= W_E(h, tau lam^2) + m log lam >= mu_bar(ball, tau lam^2) + m log lam.

    The first gap is 4 tau times the Dirichlet margin since the entropy
    integrals of phi and h agree.
    """

    mu_bar: float
    rearranged_w: float
    euclidean_bound: float
    dirichlet_margin: float
    lam: float
    ball_radius: float

    @property
    def margin(self) -> float:
        return self.mu_bar - self.euclidean_bound


def symmetrization_check(
    geom: RadialGeometry,
    domain: RadialDomain,
    tau: float,
    lam: float,
    options: Optional[SolverOptions] = None,
) -> SymmetrizationReport:
    """Compare mu_bar on a domain with mu_bar of its Euclidean rearrangement at tau lam^2."""
    lam = validate_positive(lam, "lambda")
    m = geom.m
    res = minimize_mu(geom, "zero", domain, tau, options)
    h = equimeasurable_rearrangement(geom, domain, res.minimizer)
    tl = tau * lam * lam
    shift = m * math.log(lam)
    rearranged = (
        -m
        - 0.5 * m * math.log(4.0 * math.pi * tl)
        + 4.0 * tl * h.dirichlet()
        - h.entropy_integral()
        + shift
    )
    ball = euclidean(m, h.ball_radius, max(64, round(h.ball_radius / geom.ds)))
    flat = minimize_mu(ball, "zero", RadialDomain(0.0, h.ball_radius), tl, options)
    return SymmetrizationReport(
        res.mu,
        rearranged,
        flat.mu + shift,
        dirichlet_comparison(geom, res.minimizer, h, lam),
        lam,
        h.ball_radius,
    )


def curvature_sandwich(
    geom: RadialGeometry,
    domain: RadialDomain,
    tau: float,
    options: Optional[SolverOptions] = None,
) -> tuple[MuResult, MuResult]:
    """mu (a = R) and mu_bar (a = 0) on the same domain."""
    return (
        minimize_mu(geom, "scalar", domain, tau, options),
        minimize_mu(geom, "zero", domain, tau, options),
    )


def exhaustion_series(
    m: int, radii: Sequence[float], tau: float, ds: float, options: Optional[SolverOptions] = None
) -> list[MuResult]:
    """mu_bar of Euclidean balls of growing radius at a common grid spacing."""
    out = []
    for rho in radii:
        geom = euclidean(m, rho, max(64, round(rho / ds)))
        out.append(minimize_mu(geom, "zero", RadialDomain(0.0, rho), tau, options))
    return out
