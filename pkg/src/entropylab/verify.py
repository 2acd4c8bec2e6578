# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Inequality checks on configured flows and domains.

Every check computes both sides of one inequality with the other modules and
returns a CheckResult oriented as lhs <= rhs, so margin = rhs - lhs and a
check passes iff margin >= -tol. Bounds carrying constants such as 2^{m+7} or
e^{500 A^2} are compared in log space (or log-log space for doubly exponential
ones) and classified "astronomical".

run_suite evolves (or loads) the configured flow once, runs the enabled check
families and returns a SuiteReport in declared order.

Example usage:
    config = RunConfig.from_file(Path("configs/verify_default.json"))
    report = run_suite(config)
    print(report.to_model().render())
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Optional

import numpy as np
import numpy.typing as npt

from .cache import FlowCache
from .conjugate_heat import (
    ConjugateHeatSolution,
    compute_harnack_fields,
    differential_harnack_along_curve,
    gaussian_terminal,
    integrated_harnack,
    minimizer_terminal,
    monotonicity_series,
    solve_conjugate,
    terminal_consistency,
    weighted_integral,
)
from .cutoff import (
    bounded_cutoff_values,
    interpolation_coefficients,
    make_bounded_cutoff,
    make_unbounded_cutoff,
    verify_psi_inequality,
)
from .entropy import (
    AField,
    MuResult,
    NuResult,
    SolverOptions,
    compute_nu,
    curvature_sandwich,
    exhaustion_series,
    minimize_mu,
    nu_sample_grid,
    symmetrization_check,
)
from .exceptions import ConfigurationError, ConstructionError, DomainError, ValidationError
from .flow import FlowSolution, FlowSpec, check_distance_evolution, check_flow_hypothesis, evolve
from .geometry import (
    GeodesicBall,
    Pole,
    RadialDomain,
    RadialGeometry,
    ball_domain,
    ball_volume,
    curvature_bounds,
    from_preset,
    unit_ball_constant,
    volume_ratio,
)
from .models import CheckConfig, CheckRecord, RunConfig, SuiteReportModel, Tolerances
from .reduced import BaseMeasure, reduced_distance_upper_report, reduced_fields_wrt_measure

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

# smallest positive argument taken to a logarithm
LOG_FLOOR = 1e-300

# check families whose bounds are dominated by non-sharp constants
ASTRONOMICAL = frozenset(
    {
        "volume-ratio/lower",
        "volume-ratio/lower-nu",
        "volume-ratio/equiv-upper",
        "volume-ratio/equiv-nu-upper",
        "nlc/local",
        "nlc/improved",
        "propagation/nu-intermediate",
        "propagation/nu-final",
        "propagation/volume-final",
        "reduced/upper-estimate",
    }
)


def _package_version(name: str) -> str:
    try:
        return version(name)
    except PackageNotFoundError:
        return "unknown"


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    """
    One evaluated inequality lhs <= rhs.

    Attributes:
        id: Stable check id, "<family>/<inequality>" with an optional "@<case>" suffix
        lhs, rhs: Both sides (log values when log_space is set); None when skipped
        margin: rhs - lhs
        passed: margin >= -tolerance and both sides finite
        slackness: "tight", "moderate" or "astronomical"
        inputs_digest: SHA-256 of the inputs that determine the result
    """

    id: str
    lhs: Optional[float]
    rhs: Optional[float]
    margin: Optional[float]
    passed: bool
    slackness: str
    inputs_digest: str
    skipped: bool = False
    control: bool = False
    log_space: bool = False
    metadata: dict[str, Any] = field(default_factory=dict)

    def as_control(self) -> CheckResult:
        cid = self.id if self.id.startswith("control/") else f"control/{self.id}"
        return CheckResult(
            cid,
            self.lhs,
            self.rhs,
            self.margin,
            self.passed,
            self.slackness,
            self.inputs_digest,
            self.skipped,
            True,
            self.log_space,
            self.metadata,
        )

    def to_record(self) -> CheckRecord:
        return CheckRecord(
            id=self.id,
            lhs=self.lhs,
            rhs=self.rhs,
            margin=self.margin,
            passed=self.passed,
            slackness=self.slackness,  # type: ignore[arg-type]
            skipped=self.skipped,
            control=self.control,
            log_space=self.log_space,
            inputs_digest=self.inputs_digest,
            metadata=_clean(self.metadata),
        )


def _clean(value: Any) -> Any:
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def family_of(check_id: str) -> str:
    """Check id without the control prefix and the case suffix."""
    return check_id.removeprefix("control/").split("@", 1)[0]


def classify(check_id: str, margin: Optional[float], tol: float) -> str:
    if family_of(check_id) in ASTRONOMICAL:
        return "astronomical"
    if margin is not None and math.isfinite(margin) and abs(margin) <= 10.0 * tol:
        return "tight"
    return "moderate"


def make_result(
    check_id: str,
    lhs: float,
    rhs: float,
    tol: float,
    digest: str,
    log_space: bool = False,
    metadata: Optional[dict[str, Any]] = None,
) -> CheckResult:
    """Orient, classify and log one evaluated inequality."""
    meta = dict(metadata or {})
    meta.setdefault("tolerance", tol)
    lhs, rhs = float(lhs), float(rhs)
    if not (math.isfinite(lhs) and math.isfinite(rhs)):
        logger.warning("check %s produced a non-finite side (lhs=%r, rhs=%r)", check_id, lhs, rhs)
        return CheckResult(
            check_id,
            lhs if math.isfinite(lhs) else None,
            rhs if math.isfinite(rhs) else None,
            None,
            False,
            classify(check_id, None, tol),
            digest,
            log_space=log_space,
            metadata=meta,
        )
    margin = rhs - lhs
    passed = margin >= -tol
    result = CheckResult(
        check_id, lhs, rhs, margin, passed, classify(check_id, margin, tol), digest, log_space=log_space, metadata=meta
    )
    logger.info("check %s: margin=%.6g %s [%s]", check_id, margin, "pass" if passed else "FAIL", result.slackness)
    return result


def skipped_result(check_id: str, reason: str, digest: str) -> CheckResult:
    logger.warning("check %s skipped: %s", check_id, reason)
    return CheckResult(
        check_id, None, None, None, False, "moderate", digest, skipped=True, metadata={"skip_reason": reason}
    )


def _log_le_exp(check_id: str, value: float, log_bound: float, tol: float, digest: str, metadata: dict[str, Any]) -> CheckResult:
    """value <= e^{log_bound} compared as log(max(value, floor)) <= log_bound."""
    meta = {**metadata, "value": value}
    return make_result(check_id, math.log(max(value, LOG_FLOOR)), log_bound, tol, digest, log_space=True, metadata=meta)


def geometry_tag(geom: RadialGeometry) -> str:
    h = hashlib.sha256(f"{geom.m}:{geom.topology}".encode())
    h.update(np.ascontiguousarray(geom.s, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(geom.f, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


def flow_tag(flow: FlowSolution) -> str:
    h = hashlib.sha256(f"{flow.m}:{flow.topology}:{flow.kind}:{flow.k!r}:{flow.lam!r}".encode())
    for arr in (flow.times, flow.warp, flow.phi):
        h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


def inputs_digest(check_id: str, **inputs: Any) -> str:
    payload = json.dumps({"id": check_id, **_clean(inputs)}, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


class NuTable:
    """
    mu samples of one (geometry, a-field, domain).

    nu(tau) is the minimum over every sample s <= tau computed so far, so
    values at nested scales are taken over nested sample sets.
    """

    def __init__(
        self,
        geom: RadialGeometry,
        a_field: AField,
        domain: RadialDomain,
        n_points: int = 24,
        options: Optional[SolverOptions] = None,
        jobs: int = 1,
    ) -> None:
        self.geom = geom
        self.a_field = a_field
        self.domain = domain
        self.n_points = n_points
        self.options = options
        self.jobs = jobs
        self.samples: dict[float, MuResult] = {}

    def ensure(self, tau: float, extra: Sequence[float] = ()) -> NuResult:
        known = [s for s in self.samples if s <= tau * (1 + 1e-12)]
        return compute_nu(
            self.geom,
            self.a_field,
            self.domain,
            tau,
            self.n_points,
            extra_samples=[*known, *extra],
            jobs=self.jobs,
            options=self.options,
            cache=self.samples,
        )

    def best(self, tau: float) -> MuResult:
        inside = [r for s, r in sorted(self.samples.items()) if s <= tau * (1 + 1e-12)]
        if not inside:
            self.ensure(tau)
            return self.best(tau)
        return min(inside, key=lambda r: r.mu)

    def value(self, tau: float) -> float:
        return self.best(tau).mu

    def nu(self, tau: float) -> float:
        self.ensure(tau)
        return self.value(tau)


def aligned_domain(geom: RadialGeometry, ball: GeodesicBall) -> RadialDomain:
    """The ball's radial interval with both ends moved to the nearest grid nodes."""
    dom = ball_domain(geom, ball)
    lo = int(round(dom.s_lo / geom.ds))
    hi = int(round(dom.s_hi / geom.ds))
    last = geom.s.size - 1
    return RadialDomain(float(geom.s[min(lo, last)]), float(geom.s[min(hi, last)]), dom.clipped)


def _whole(geom: RadialGeometry, radius: float) -> bool:
    return geom.is_sphere and radius >= geom.s_max


def _cutoff_gradient_constant() -> float:
    """sup (psi')^2 / (4 psi) of the bounded cutoff, so that C_h = const / r^2."""
    cut = make_bounded_cutoff()
    pos = cut.psi > 0
    return float(np.max(cut.dpsi[pos] ** 2 / (4.0 * cut.psi[pos])))


def _half_slice(flow: FlowSolution) -> int:
    i = int(np.argmin(np.abs(flow.times - 0.5 * flow.T)))
    if abs(flow.times[i] - 0.5 * flow.T) > 1e-9 * flow.T:
        raise DomainError("propagation", "the flow has no slice at T/2", "Use an even n_slices")
    return i


def _max_on_ball(flow: FlowSolution, i: int, pole: Pole, radius: float, values: FloatArray) -> float:
    d = flow.distance_at(float(flow.times[i]), pole)
    inside = d <= radius
    order = np.argsort(d)
    edge = float(np.interp(min(radius, float(d[order][-1])), d[order], values[order]))
    return max(float(np.max(values[inside])) if np.any(inside) else -math.inf, edge)


def _contained(flow: FlowSolution, i: int, inner: tuple[Pole, float], outer: tuple[Pole, float]) -> bool:
    """B(inner) inside B(outer) on slice i, both centred at poles."""
    d = flow.distance_at(float(flow.times[i]), "north")
    diameter = float(d[-1])
    (p_in, r_in), (p_out, r_out) = inner, outer
    if flow.topology == "sphere" and r_out >= diameter:
        return True
    gap = 0.0 if p_in == p_out else diameter
    return gap + r_in <= r_out


def _sectional_sup(flow: FlowSolution, i: int, pole: Pole, radius: float) -> float:
    """sup |Rm| on a ball as the largest sectional curvature magnitude."""
    curv = flow.curvatures[i]
    m = flow.m
    k_rad = curv.ric_rad / (m - 1)
    k_tan = (curv.ric_sph - k_rad) / (m - 2) if m > 2 else k_rad
    rm = np.maximum(np.abs(k_rad), np.abs(k_tan))
    d0 = flow.distance_at(0.0, pole)
    inside = d0 <= radius
    return float(np.max(rm[inside])) if np.any(inside) else 0.0


def _conjugate_from(flow: FlowSolution, result: MuResult, steps_per_slice: int, tol_mass: float) -> ConjugateHeatSolution:
    return solve_conjugate(flow, minimizer_terminal(flow, result), steps_per_slice=steps_per_slice, tol_mass=tol_mass)


# ---------------------------------------------------------------------------
# single-geometry checks
# ---------------------------------------------------------------------------


def check_tau_scaling(
    geom: RadialGeometry,
    domain: RadialDomain,
    tau1: float,
    tau2: float,
    tol: float = 1e-6,
    n_points: int = 24,
    options: Optional[SolverOptions] = None,
    jobs: int = 1,
) -> list[CheckResult]:
    """
    nu(tau2) <= nu(tau1) <= nu(tau2) + (m/2) log(tau2/tau1) for the log-Sobolev
    variant, and the same with the curvature correction lam_up tau1 + lam_low tau2
    for the a = R variant.
    """
    if not 0 < tau1 <= tau2:
        raise ValidationError("tau pair", (tau1, tau2), "0 < tau1 <= tau2")
    m = geom.m
    bounds = curvature_bounds(geom, domain)
    digest = inputs_digest("tau-scaling", geom=geometry_tag(geom), domain=[domain.s_lo, domain.s_hi], tau=[tau1, tau2])
    out = []
    for a_field, label in (("zero", "nu-bar"), ("scalar", "nu")):
        table = NuTable(geom, a_field, domain, n_points, options, jobs)  # type: ignore[arg-type]
        table.ensure(tau1)
        table.ensure(tau2)
        n1, n2 = table.value(tau1), table.value(tau2)
        extra = 0.0 if a_field == "zero" else bounds.lam_upper * tau1 + bounds.lam_lower * tau2
        meta = {"nu_tau1": n1, "nu_tau2": n2, "samples": len(table.samples)}
        out.append(make_result(f"tau-scaling/{label}-lower", n2, n1, tol, digest, metadata=meta))
        out.append(
            make_result(
                f"tau-scaling/{label}-upper",
                n1,
                n2 + 0.5 * m * math.log(tau2 / tau1) + extra,
                tol,
                digest,
                metadata={**meta, "curvature_term": extra},
            )
        )
    return out


def check_volume_ratio_lower(
    geom: RadialGeometry,
    ball: GeodesicBall,
    tol: float = 1e-6,
    n_points: int = 24,
    options: Optional[SolverOptions] = None,
    jobs: int = 1,
) -> list[CheckResult]:
    """
    log(|B| / (omega_m r0^m)) >= nu_bar(B, r0^2) - 2^{m+7} and
    log(|B| / (omega_m r0^m)) >= nu(B, r0^2) - 2^{m+7} - lam_up r0^2.
    """
    m, r0 = geom.m, ball.radius
    dom = aligned_domain(geom, ball)
    digest = inputs_digest("volume-ratio-lower", geom=geometry_tag(geom), ball=[ball.center, r0])
    log_ratio = math.log(volume_ratio(geom, ball))
    nu_bar = NuTable(geom, "zero", dom, n_points, options, jobs).nu(r0 * r0)
    nu = NuTable(geom, "scalar", dom, n_points, options, jobs).nu(r0 * r0)
    lam_up = curvature_bounds(geom, dom).lam_upper
    const = float(2 ** (m + 7))
    meta = {"nu_bar": nu_bar, "nu": nu, "lam_upper": lam_up, "log_ratio": log_ratio, "clipped": dom.clipped}
    return [
        make_result("volume-ratio/lower", nu_bar - const, log_ratio, tol, digest, log_space=True, metadata=meta),
        make_result(
            "volume-ratio/lower-nu", nu - const - lam_up * r0 * r0, log_ratio, tol, digest, log_space=True, metadata=meta
        ),
    ]


def check_volume_ratio_equiv(
    geom: RadialGeometry,
    ball: GeodesicBall,
    tol: float = 1e-6,
    n_points: int = 24,
    options: Optional[SolverOptions] = None,
    jobs: int = 1,
    nu_bar_override: Optional[float] = None,
) -> list[CheckResult]:
    """
    -10 m^2 (1 + K r0) + (m+1) log rho <= nu_bar <= log rho + 2^{m+7}, and the
    a = R variant with lam_low r0^2 and lam_up r0^2 corrections.

    K comes from the Ricci lower bound on the 5 r0 ball. nu_bar_override
    replaces the computed nu_bar in the lower inequality only.
    """
    m, r0 = geom.m, ball.radius
    digest = inputs_digest(
        "volume-ratio-equiv", geom=geometry_tag(geom), ball=[ball.center, r0], override=nu_bar_override
    )
    big = GeodesicBall(ball.center, 5.0 * r0)
    if not geom.is_sphere and big.radius > geom.s_max:
        return [skipped_result("volume-ratio/equiv-lower", "the 5 r0 ball does not fit in the geometry", digest)]
    dom = aligned_domain(geom, ball)
    K = curvature_bounds(geom, ball_domain(geom, big)).K
    bounds = curvature_bounds(geom, dom)
    log_rho = math.log(volume_ratio(geom, ball))
    nu_bar = NuTable(geom, "zero", dom, n_points, options, jobs).nu(r0 * r0)
    const = float(2 ** (m + 7))
    base = 10.0 * m * m * (1.0 + K * r0)
    meta = {"K": K, "log_rho": log_rho, "nu_bar": nu_bar}
    lower_lhs = -base + (m + 1) * log_rho
    if nu_bar_override is not None:
        return [
            make_result(
                "volume-ratio/equiv-lower", lower_lhs, nu_bar_override, tol, digest, metadata={**meta, "fabricated_nu_bar": nu_bar_override}
            )
        ]
    nu = NuTable(geom, "scalar", dom, n_points, options, jobs).nu(r0 * r0)
    meta["nu"] = nu
    return [
        make_result("volume-ratio/equiv-lower", lower_lhs, nu_bar, tol, digest, metadata=meta),
        make_result("volume-ratio/equiv-upper", nu_bar, log_rho + const, tol, digest, log_space=True, metadata=meta),
        make_result(
            "volume-ratio/equiv-nu-lower",
            -(base + bounds.lam_lower * r0 * r0) + (m + 1) * log_rho,
            nu,
            tol,
            digest,
            metadata=meta,
        ),
        make_result(
            "volume-ratio/equiv-nu-upper",
            nu,
            log_rho + const + bounds.lam_upper * r0 * r0,
            tol,
            digest,
            log_space=True,
            metadata=meta,
        ),
    ]


def check_inclusion(
    geom: RadialGeometry,
    center: Pole,
    radii: Sequence[float],
    tau: float,
    a_field: AField = "zero",
    min_gap: float = 0.0,
    tol: float = 1e-6,
    options: Optional[SolverOptions] = None,
) -> list[CheckResult]:
    """mu(B(r1)) - mu(B(r2)) >= min_gap for consecutive r1 < r2 on aligned grids."""
    radii = sorted(float(r) for r in radii)
    digest = inputs_digest("inclusion", geom=geometry_tag(geom), center=center, radii=radii, tau=tau, a=a_field)
    mus = [minimize_mu(geom, a_field, aligned_domain(geom, GeodesicBall(center, r)), tau, options).mu for r in radii]
    return [
        make_result(
            f"inclusion/strict@{r1:g}-{r2:g}", mu2 + min_gap, mu1, tol, digest, metadata={"mu_inner": mu1, "mu_outer": mu2}
        )
        for r1, r2, mu1, mu2 in zip(radii, radii[1:], mus, mus[1:])
    ]


def check_nu_nonpositive(
    geom: RadialGeometry,
    ball: GeodesicBall,
    tau: float,
    tol: float = 1e-3,
    n_points: int = 24,
    options: Optional[SolverOptions] = None,
) -> list[CheckResult]:
    """nu <= 0 for both variants. The computed nu is an upper bound, so tol absorbs discretization."""
    dom = aligned_domain(geom, ball)
    digest = inputs_digest("nu-nonpositive", geom=geometry_tag(geom), ball=[ball.center, ball.radius], tau=tau)
    out = []
    for a_field, label in (("zero", "nu-bar"), ("scalar", "nu")):
        res = compute_nu(geom, a_field, dom, tau, n_points, options=options)  # type: ignore[arg-type]
        out.append(
            make_result(f"nu/nonpositive-{label}", res.nu, 0.0, tol, digest, metadata={"argmin": res.argmin, "approximate": res.approximate})
        )
    return out


def check_exhaustion(
    m: int,
    radii: Sequence[float],
    tau: float,
    ds: float,
    limit: float = 5e-2,
    tol: float = 1e-6,
    options: Optional[SolverOptions] = None,
) -> list[CheckResult]:
    """mu_bar of growing Euclidean balls: positive, strictly decreasing, small at the largest radius."""
    radii = sorted(float(r) for r in radii)
    digest = inputs_digest("exhaustion", m=m, radii=radii, tau=tau, ds=ds)
    mus = np.array([r.mu for r in exhaustion_series(m, radii, tau, ds, options)])
    meta = {"radii": radii, "mu": mus.tolist()}
    return [
        make_result("exhaustion/positive", 0.0, float(np.min(mus)), tol, digest, metadata=meta),
        make_result("exhaustion/decreasing", 0.0, float(np.min(-np.diff(mus))), tol, digest, metadata=meta),
        make_result("exhaustion/limit", float(mus[-1]), limit, tol, digest, metadata=meta),
    ]


def check_sandwich(
    geom: RadialGeometry,
    ball: GeodesicBall,
    tau: float,
    tol: float = 1e-6,
    options: Optional[SolverOptions] = None,
) -> list[CheckResult]:
    """mu - lam_up tau <= mu_bar <= mu + lam_low tau."""
    dom = aligned_domain(geom, ball)
    digest = inputs_digest("sandwich", geom=geometry_tag(geom), ball=[ball.center, ball.radius], tau=tau)
    mu, mu_bar = curvature_sandwich(geom, dom, tau, options)
    b = curvature_bounds(geom, dom)
    meta = {"mu": mu.mu, "mu_bar": mu_bar.mu, "lam_upper": b.lam_upper, "lam_lower": b.lam_lower}
    return [
        make_result("sandwich/upper-curvature", mu.mu - b.lam_upper * tau, mu_bar.mu, tol, digest, metadata=meta),
        make_result("sandwich/lower-curvature", mu_bar.mu, mu.mu + b.lam_lower * tau, tol, digest, metadata=meta),
    ]


def check_symmetrization(
    geom: RadialGeometry,
    ball: GeodesicBall,
    tau: float,
    lam: float = 1.0,
    tol: float = 1e-6,
    options: Optional[SolverOptions] = None,
) -> list[CheckResult]:
    """mu_bar(Omega, tau) >= mu_bar(Euclidean ball of equal volume, tau lam^2) + m log lam."""
    dom = aligned_domain(geom, ball)
    digest = inputs_digest("symmetrization", geom=geometry_tag(geom), ball=[ball.center, ball.radius], tau=tau, lam=lam)
    rep = symmetrization_check(geom, dom, tau, lam, options)
    meta = {"rearranged_w": rep.rearranged_w, "ball_radius": rep.ball_radius, "lam": lam}
    return [
        make_result("symmetrization/dirichlet", 0.0, rep.dirichlet_margin, tol, digest, metadata=meta),
        make_result("symmetrization/euclidean", rep.euclidean_bound, rep.mu_bar, tol, digest, metadata=meta),
    ]


def check_cutoffs(
    A_values: Sequence[float],
    control: bool = False,
    F0_control: float = 1.0,
) -> list[CheckResult]:
    """
    Certification margins of both cutoffs and the interpolation coefficient bound.

    As a control, the unbounded cutoff is certified with a too small F0 and the
    quintic smoothstep is offered as a bounded cutoff; both must fail.
    """
    digest = inputs_digest("cutoff", A=list(A_values), control=control, F0=F0_control)
    out = []
    if control:
        try:
            make_bounded_cutoff("quintic-smoothstep")
            worst = 0.0
        except ConstructionError as e:
            worst = min(e.margins.values())
        out.append(make_result("cutoff/bounded@quintic-smoothstep", 0.0, worst, 0.0, digest))
        for A in A_values:
            cert = verify_psi_inequality(make_unbounded_cutoff(A), F0_control)
            out.append(make_result(f"cutoff/unbounded@{A:g}", 0.0, cert.min_margin, 0.0, digest, metadata={"F0": F0_control}))
        return out

    bounded = make_bounded_cutoff()
    out.append(make_result("cutoff/bounded", 0.0, min(bounded.margins.values()), 0.0, digest, metadata=bounded.margins))
    for A in A_values:
        c1, c2, c3 = interpolation_coefficients(math.sqrt(A))
        out.append(
            make_result(f"cutoff/coefficients@{A:g}", abs(c1) + abs(c2) + abs(c3), 950.0, 0.0, digest, metadata={"c": [c1, c2, c3]})
        )
        cert = verify_psi_inequality(make_unbounded_cutoff(A), 1000.0 * A * A)
        out.append(
            make_result(
                f"cutoff/unbounded@{A:g}",
                0.0,
                cert.min_margin,
                0.0,
                digest,
                log_space=True,
                metadata={"pieces": cert.piece_margins, "joins": cert.join_errors},
            )
        )
    return out


# ---------------------------------------------------------------------------
# flow checks
# ---------------------------------------------------------------------------


def check_flow_hypothesis_bound(flow: FlowSolution, x0: Pole, A: float) -> CheckResult:
    """sup t |Rc| on B_{g(t)}(x0, sqrt t) against (m-1) A."""
    rep = check_flow_hypothesis(flow, x0, A)
    digest = inputs_digest("flow-hypothesis", flow=flow_tag(flow), x0=x0, A=A)
    return make_result("flow/hypothesis", rep.sup, rep.bound, 0.0, digest, metadata={"failing_slices": int(np.sum(~rep.slice_passed))})


def check_distance_bound(flow: FlowSolution, x0: Pole, A: float, tol: float = 1e-6) -> CheckResult:
    """(d/dt - Delta)(d + 2 A sqrt t) >= 0 away from the parabolic ball."""
    rep = check_distance_evolution(flow, x0, A, tol)
    digest = inputs_digest("distance-evolution", flow=flow_tag(flow), x0=x0, A=A)
    if not math.isfinite(rep.min_margin):
        return skipped_result("flow/distance-evolution", "no grid point with d > sqrt(t)", digest)
    return make_result("flow/distance-evolution", 0.0, rep.min_margin, tol, digest)


def check_harnack_suite(
    flow: FlowSolution,
    ball: Optional[GeodesicBall],
    tau_T: float,
    tolerances: Tolerances,
    terminal: str = "minimizer",
    t_fraction: float = 0.9,
    curve_c: float = 0.5,
    steps_per_slice: int = 50,
    options: Optional[SolverOptions] = None,
) -> list[CheckResult]:
    """
    v <= 0, the terminal identity, and the differential and integrated Harnack
    inequalities along x(tau) = c sqrt(tau) from the north pole.

    With Gaussian terminal data (exact only on static flat space, where mu = 0)
    the first check becomes the equality |v| <= tol_v max u.
    """
    digest = inputs_digest(
        "harnack", flow=flow_tag(flow), ball=None if ball is None else [ball.center, ball.radius], tau_T=tau_T, terminal=terminal, c=curve_c
    )
    tol_curve = tolerances.tol_v
    out = []
    if terminal == "gaussian":
        data = gaussian_terminal(flow, tau_T)
        mu = 0.0
    else:
        geomT = flow.geometry_at(flow.n_slices - 1)
        dom = RadialDomain(0.0, geomT.s_max) if ball is None else aligned_domain(geomT, ball)
        res = minimize_mu(geomT, "scalar", dom, tau_T, options)
        data = minimizer_terminal(flow, res)
        mu = res.mu
        tc = terminal_consistency(res)
        out.append(
            make_result(
                "harnack/terminal-identity",
                tc.v_max,
                10.0 * tolerances.tol_el * tc.u_max * tc.scale,
                0.0,
                digest,
                metadata={"u_max": tc.u_max},
            )
        )
    chs = solve_conjugate(flow, data, steps_per_slice=steps_per_slice, tol_mass=tolerances.tol_mass)
    fields = compute_harnack_fields(chs, mu)
    t_max = t_fraction * flow.T
    meta = {"mu": mu, "masked_fraction": fields.masked_fraction, "t_max": t_max}
    if terminal == "gaussian":
        out.append(make_result("harnack/v-equality", fields.max_abs_v_ratio(t_max), tolerances.tol_v, 0.0, digest, metadata=meta))
    else:
        out.append(make_result("harnack/v-nonpositive", fields.max_v_ratio(t_max), tolerances.tol_v, 0.0, digest, metadata=meta))

    def curve(tau: FloatArray) -> FloatArray:
        return curve_c * np.sqrt(tau)

    diff = differential_harnack_along_curve(chs, mu, curve)
    excess = float(np.nanmax(diff.lhs - diff.rhs))
    out.append(make_result("harnack/differential", excess, 0.0, tol_curve, digest, metadata=meta))
    ends = (curve_c * math.sqrt(tau_T), curve_c * math.sqrt(tau_T + flow.T))
    integ = integrated_harnack(chs, mu, curve, ends)
    out.append(
        make_result("harnack/integrated", integ.log_rhs, integ.log_lhs, tol_curve, digest, log_space=True, metadata={**meta, "action": integ.action})
    )
    return out


def _inner_outer(flow: FlowSolution, center: Pole, r: float) -> tuple[bool, FloatArray, FloatArray]:
    """Whether B(r) is the whole initial manifold, and the cutoff h = psi(d/r) with |grad h|^2 at t = 0."""
    geom0_sphere = flow.topology == "sphere"
    d0 = flow.distance_at(0.0, center)
    if geom0_sphere and r >= float(d0.max()):
        return True, np.ones_like(d0), np.zeros_like(d0)
    psi, dpsi, _ = bounded_cutoff_values(d0 / r)
    return False, psi, (dpsi / r) ** 2


def _h_weights(psi: FloatArray, grad2: FloatArray, tau0: float) -> FloatArray:
    """tau0 |grad h|^2 / h - h log h, zero where h vanishes."""
    out = np.zeros_like(psi)
    pos = psi > 0
    out[pos] = tau0 * grad2[pos] / psi[pos] - psi[pos] * np.log(psi[pos])
    return out


def check_effective_monotonicity(
    flow: FlowSolution,
    center: Pole,
    inner_radius: float,
    radius_T: Optional[float],
    tau_T: float,
    tolerances: Tolerances,
    tol: Optional[float] = None,
    steps_per_slice: int = 50,
    options: Optional[SolverOptions] = None,
) -> list[CheckResult]:
    """
    mu0 - mu_T <= middle <= (4 tau0 C_h + 1/e) int_{annulus} u / int_{inner} u
    with Omega_0' = B(r), Omega_0 = B(2r) at t = 0, h = psi(d/r) and Omega a
    ball at t = T (the whole manifold when radius_T is None).
    """
    tol = tolerances.tol_check if tol is None else tol
    digest = inputs_digest(
        "effective-monotonicity", flow=flow_tag(flow), center=center, r=inner_radius, R=radius_T, tau_T=tau_T
    )
    geom0 = flow.geometry_at(0)
    geomT = flow.geometry_at(flow.n_slices - 1)
    dom_T = RadialDomain(0.0, geomT.s_max) if radius_T is None else aligned_domain(geomT, GeodesicBall(center, radius_T))
    whole, psi, grad2 = _inner_outer(flow, center, inner_radius)
    outer = geom0.s_max if whole else 2.0 * inner_radius
    dom_0 = RadialDomain(0.0, geom0.s_max) if whole else aligned_domain(geom0, GeodesicBall(center, outer))
    tau0 = tau_T + flow.T

    mu_T = minimize_mu(geomT, "scalar", dom_T, tau_T, options)
    mu_0 = minimize_mu(geom0, "scalar", dom_0, tau0, options)
    chs = _conjugate_from(flow, mu_T, steps_per_slice, tolerances.tol_mass)
    if whole:
        inner_u, annulus_u, middle, C_h = chs.integral(0), 0.0, 0.0, 0.0
    else:
        C_h = _cutoff_gradient_constant() / inner_radius**2
        inner_u = chs.ball_integral(0, center, inner_radius)
        annulus_u = chs.ball_integral(0, center, outer) - inner_u
        middle = chs.ball_integral(0, center, outer, _h_weights(psi, grad2, tau0)) / chs.ball_integral(0, center, outer, psi)
    rhs = (4.0 * tau0 * C_h + math.exp(-1.0)) * annulus_u / inner_u
    lhs = mu_0.mu - mu_T.mu
    meta = {"mu_0": mu_0.mu, "mu_T": mu_T.mu, "C_h": C_h, "inner_u": inner_u, "annulus_u": annulus_u, "middle": middle, "whole": whole}
    return [
        make_result("monotonicity/effective-mu", lhs, rhs, tol, digest, metadata=meta),
        make_result("monotonicity/effective-mu-sharp", lhs, middle, tol, digest, metadata=meta),
    ]


def _min_mass(
    flow: FlowSolution,
    table: NuTable,
    lambdas: Sequence[float],
    slice_index: int,
    center: Pole,
    radius: Optional[float],
    tolerances: Tolerances,
    steps_per_slice: int,
) -> tuple[float, MuResult, ConjugateHeatSolution, list[float]]:
    """min over lambda of int_{B(radius)} u^(lambda) on a slice; radius None is the whole manifold."""
    best: Optional[tuple[float, MuResult, ConjugateHeatSolution]] = None
    masses = []
    for lam in lambdas:
        if lam not in table.samples:
            table.samples[lam] = minimize_mu(table.geom, table.a_field, table.domain, lam, table.options)
        res = table.samples[lam]
        chs = _conjugate_from(flow, res, steps_per_slice, tolerances.tol_mass)
        mass = chs.integral(slice_index) if radius is None else chs.ball_integral(slice_index, center, radius)
        masses.append(mass)
        if best is None or mass < best[0]:
            best = (mass, res, chs)
    assert best is not None
    return best[0], best[1], best[2], masses


def check_effective_nu(
    flow: FlowSolution,
    center: Pole,
    inner_radius: float,
    radius_T: Optional[float],
    tau_T: float,
    tolerances: Tolerances,
    n_lambda: int = 4,
    n_points: int = 24,
    tol: Optional[float] = None,
    steps_per_slice: int = 50,
    options: Optional[SolverOptions] = None,
) -> list[CheckResult]:
    """nu0 - nu_T <= (4 tau0 C_h + 1/e)(1/c_u - 1) with c_u from conjugate solves over a lambda grid."""
    tol = tolerances.tol_check if tol is None else tol
    digest = inputs_digest(
        "effective-nu", flow=flow_tag(flow), center=center, r=inner_radius, R=radius_T, tau_T=tau_T, n_lambda=n_lambda
    )
    geom0 = flow.geometry_at(0)
    geomT = flow.geometry_at(flow.n_slices - 1)
    dom_T = RadialDomain(0.0, geomT.s_max) if radius_T is None else aligned_domain(geomT, GeodesicBall(center, radius_T))
    whole, _, _ = _inner_outer(flow, center, inner_radius)
    dom_0 = RadialDomain(0.0, geom0.s_max) if whole else aligned_domain(geom0, GeodesicBall(center, 2.0 * inner_radius))
    tau0 = tau_T + flow.T

    table_T = NuTable(geomT, "scalar", dom_T, n_points, options)
    lambdas = nu_sample_grid(tau_T, n_lambda).tolist()
    nu_T = table_T.nu(tau_T)
    table_0 = NuTable(geom0, "scalar", dom_0, n_points, options)
    nu_0 = table_0.nu(tau0)
    c_u, _, _, masses = _min_mass(flow, table_T, lambdas, 0, center, None if whole else inner_radius, tolerances, steps_per_slice)
    C_h = 0.0 if whole else _cutoff_gradient_constant() / inner_radius**2
    rhs = (4.0 * tau0 * C_h + math.exp(-1.0)) * (1.0 / c_u - 1.0)
    window = [r.mu for s, r in table_0.samples.items() if flow.T <= s <= tau0 * (1 + 1e-12)]
    middle = (min(window) - nu_T) if window else None
    meta = {"nu_0": nu_0, "nu_T": nu_T, "c_u": c_u, "lambdas": lambdas, "masses": masses, "C_h": C_h, "middle": middle}
    return [make_result("monotonicity/effective-nu", nu_0 - nu_T, rhs, tol, digest, metadata=meta)]


def check_global_monotonicity(
    flow: FlowSolution,
    tau_T: float,
    tol: float = 1e-6,
    slices: Optional[list[int]] = None,
    options: Optional[SolverOptions] = None,
) -> CheckResult:
    """mu(g(t), tau_T + T - t) is nondecreasing in t on a closed manifold."""
    digest = inputs_digest("global-monotonicity", flow=flow_tag(flow), tau_T=tau_T, slices=slices)
    if flow.topology != "sphere":
        return skipped_result("monotonicity/global", "requires a closed manifold", digest)
    series = monotonicity_series(flow, tau_T, options, slices)
    drops = -np.diff(series["mu"].to_numpy())
    return make_result("monotonicity/global", float(np.max(drops)), 0.0, tol, digest, metadata={"mu": series["mu"].tolist()})


def check_almost_monotonicity(
    flow: FlowSolution,
    x0: Pole,
    A: float,
    tau_T: float,
    tolerances: Tolerances,
    tol: Optional[float] = None,
    steps_per_slice: int = 50,
    options: Optional[SolverOptions] = None,
) -> list[CheckResult]:
    """
    mu(B_T(x0, 8A sqrt T), g(T), tau_T) - mu(B_0(x0, 20A sqrt T), g(0), tau_T + T) >= -1/A^2,
    plus the mass retention int u h >= e^{-1/(10A^2)} at t = 0 with h = psi(d/(10A sqrt T)).
    """
    m, T = flow.m, flow.T
    digest = inputs_digest("almost-monotonicity", flow=flow_tag(flow), x0=x0, A=A, tau_T=tau_T)
    tol = tolerances.tol_check if tol is None else tol
    ids = ("monotonicity/almost", "monotonicity/mass-retention")
    if A < 1000 * m:
        return [skipped_result(i, f"A={A:g} is below 1000 m", digest) for i in ids]
    if not 0 < tau_T < A * A * T:
        return [skipped_result(i, "tau_T must lie in (0, A^2 T)", digest) for i in ids]
    hyp = check_flow_hypothesis(flow, x0, A)
    if not hyp.passed:
        return [skipped_result(i, "curvature hypothesis t|Rc| <= (m-1)A fails", digest) for i in ids]
    root = math.sqrt(T)
    geom0 = flow.geometry_at(0)
    geomT = flow.geometry_at(flow.n_slices - 1)
    dom_T = aligned_domain(geomT, GeodesicBall(x0, 8.0 * A * root))
    dom_0 = aligned_domain(geom0, GeodesicBall(x0, 20.0 * A * root))
    mu_T = minimize_mu(geomT, "scalar", dom_T, tau_T, options)
    mu_0 = minimize_mu(geom0, "scalar", dom_0, tau_T + T, options)
    meta = {"mu_0": mu_0.mu, "mu_T": mu_T.mu, "clipped": dom_T.clipped or dom_0.clipped, "hypothesis_sup": hyp.sup}
    out = [make_result(ids[0], mu_0.mu - mu_T.mu, 1.0 / (A * A), tol, digest, metadata=meta)]

    chs = _conjugate_from(flow, mu_T, steps_per_slice, tolerances.tol_mass)
    d0 = flow.distance_at(0.0, x0)
    h = bounded_cutoff_values(d0 / (10.0 * A * root))[0]
    retained = chs.integral(0, weight=h)
    out.append(make_result(ids[1], math.exp(-1.0 / (10.0 * A * A)), retained, tolerances.tol_check, digest, metadata=meta))
    return out


def check_local_nlc(
    flow: FlowSolution,
    x0: Pole,
    A: float,
    x: Pole,
    r: float,
    tol: float = 1e-6,
    n_tau: int = 8,
    kappa_override: Optional[float] = None,
    options: Optional[SolverOptions] = None,
) -> CheckResult:
    """
    |B_T(x, r)| / (omega_m r^m) >= kappa = exp(-2^{m+7} - 2 + inf_{[T, 2T]} mu(B_0(x0, 20A sqrt T), g(0), tau)).

    The infimum runs over an n_tau-point grid, so kappa is an upper bound for the exact constant.
    """
    m, T = flow.m, flow.T
    digest = inputs_digest("local-nlc", flow=flow_tag(flow), x0=x0, A=A, x=x, r=r, kappa=kappa_override)
    cid = "nlc/local"
    root = math.sqrt(T)
    last = flow.n_slices - 1
    if A < 1000 * m:
        return skipped_result(cid, f"A={A:g} is below 1000 m", digest)
    if not 0 < r <= root:
        return skipped_result(cid, "r must lie in (0, sqrt T]", digest)
    if not check_flow_hypothesis(flow, x0, A).passed:
        return skipped_result(cid, "curvature hypothesis t|Rc| <= (m-1)A fails", digest)
    R_max = _max_on_ball(flow, last, x, r, flow.curvatures[last].R)
    if R_max > r**-2:
        return skipped_result(cid, f"R = {R_max:.4g} exceeds r^-2 on the ball", digest)
    if not _contained(flow, last, (x, r), (x0, 8.0 * A * root)):
        return skipped_result(cid, "the ball leaves B(x0, 8A sqrt T)", digest)

    geomT = flow.geometry_at(last)
    log_ratio = math.log(volume_ratio(geomT, GeodesicBall(x, r)))
    if kappa_override is not None:
        log_kappa = math.log(kappa_override)
        meta: dict[str, Any] = {"fabricated_kappa": kappa_override}
    else:
        geom0 = flow.geometry_at(0)
        dom_0 = aligned_domain(geom0, GeodesicBall(x0, 20.0 * A * root))
        taus = np.linspace(T, 2.0 * T, n_tau)
        mus = [minimize_mu(geom0, "scalar", dom_0, float(t), options).mu for t in taus]
        log_kappa = -float(2 ** (m + 7)) - 2.0 + min(mus)
        meta = {"inf_mu": min(mus), "tau_grid": taus.tolist(), "approximate": True}
    return make_result(cid, log_kappa, log_ratio, tol, digest, log_space=True, metadata=meta)


@dataclass(frozen=True)
class _Propagation:
    """Domains and values shared by the propagation checks."""

    i_half: int
    t_half: float
    nu_a: float
    nu_b: float
    nu_c: float
    table_b: NuTable
    rho_a: float
    omega_a_inner: float


def _propagation_gates(flow: FlowSolution, x0: Pole, y0: Pole, r: float, A: float) -> Optional[str]:
    m, T = flow.m, flow.T
    root = math.sqrt(T)
    last = flow.n_slices - 1
    if A <= 1000 * m:
        return f"A={A:g} must exceed 1000 m"
    if not 0 < r < root:
        return "r must lie in (0, sqrt T)"
    if not check_flow_hypothesis(flow, x0, A).passed:
        return "curvature hypothesis t|Rc| < (m-1)A fails"
    R_max = _max_on_ball(flow, last, y0, r, flow.curvatures[last].R)
    if R_max >= r**-2:
        return f"R = {R_max:.4g} is not below r^-2 on B(y0, r)"
    if not _contained(flow, last, (y0, r), (x0, A * root)):
        return "B(y0, r) leaves B(x0, A sqrt T)"
    return None


def _propagation_values(
    flow: FlowSolution, x0: Pole, y0: Pole, r: float, A: float, n_points: int, options: Optional[SolverOptions]
) -> _Propagation:
    T = flow.T
    root = math.sqrt(T)
    i_half = _half_slice(flow)
    geomH = flow.geometry_at(i_half)
    geomT = flow.geometry_at(flow.n_slices - 1)
    dom_a = aligned_domain(geomH, GeodesicBall(x0, 0.1 * root))
    dom_b = aligned_domain(geomT, GeodesicBall(x0, A * root))
    dom_c = aligned_domain(geomT, GeodesicBall(y0, r))
    nu_a = NuTable(geomH, "scalar", dom_a, n_points, options).nu(1.5 * T)
    table_c = NuTable(geomT, "scalar", dom_c, n_points, options)
    nu_c = table_c.nu(r * r)
    table_b = NuTable(geomT, "scalar", dom_b, n_points, options)
    table_b.ensure(T, extra=[table_c.best(r * r).tau])
    nu_b = table_b.value(T)
    rho_a = volume_ratio(geomH, GeodesicBall(x0, 0.1 * root))
    inner = ball_volume(geomH, GeodesicBall(x0, 0.05 * root))
    return _Propagation(i_half, float(flow.times[i_half]), nu_a, nu_b, nu_c, table_b, rho_a, inner)


def check_nu_propagation(
    flow: FlowSolution,
    x0: Pole,
    y0: Pole,
    r: float,
    A: float,
    tolerances: Tolerances,
    n_lambda: int = 3,
    n_points: int = 24,
    n_sigma: int = 32,
    n_base: int = 8,
    n_angles: int = 4,
    n_targets: int = 5,
    steps_per_slice: int = 50,
    jobs: int = 1,
    options: Optional[SolverOptions] = None,
) -> list[CheckResult]:
    """
    The chain nu_c >= nu_b >= nu_a - e^{-nu_a + G0} with its computable links.

    nu_a lives on B_{T/2}(x0, 0.1 sqrt T) at scale 1.5T, nu_b on B_T(x0, A sqrt T)
    at scale T and nu_c on B_T(y0, r) at scale r^2. The links are the inclusion
    ordering, the effective bound through c_u on the sub-flow [T/2, T], the
    comparison of int w with int u on B_{T/2}(x0, 0.05 sqrt T) and the two
    constant-laden bounds in log form.
    """
    m, T = flow.m, flow.T
    digest = inputs_digest("nu-propagation", flow=flow_tag(flow), x0=x0, y0=y0, r=r, A=A, n_lambda=n_lambda)
    ids = (
        "propagation/nu-ordering",
        "propagation/nu-effective",
        "propagation/c-u-bound",
        "propagation/nu-intermediate",
        "propagation/nu-final",
    )
    reason = _propagation_gates(flow, x0, y0, r, A)
    if reason is not None:
        return [skipped_result(i, reason, digest) for i in ids]
    vals = _propagation_values(flow, x0, y0, r, A, n_points, options)
    tol = tolerances.tol_check
    root = math.sqrt(T)
    r_inner = 0.05 * root
    diff = vals.nu_a - vals.nu_b
    meta = {"nu_a": vals.nu_a, "nu_b": vals.nu_b, "nu_c": vals.nu_c, "t_half": vals.t_half}
    out = [make_result(ids[0], vals.nu_b, vals.nu_c, tol, digest, metadata=meta)]

    lambdas = nu_sample_grid(T, n_lambda).tolist()
    c_u, res, chs, masses = _min_mass(flow, vals.table_b, lambdas, vals.i_half, x0, r_inner, tolerances, steps_per_slice)
    C_h = _cutoff_gradient_constant() / r_inner**2
    bound = (4.0 * 1.5 * T * C_h + math.exp(-1.0)) * (1.0 / c_u - 1.0)
    out.append(make_result(ids[1], diff, bound, tol, digest, metadata={**meta, "c_u": c_u, "masses": masses, "C_h": C_h}))

    sl = flow.fields_at(vals.t_half)
    d = flow.distance_at(vals.t_half, x0)
    order = np.argsort(d)
    x_edge = float(np.interp(r_inner, d[order], flow.x[order]))
    lo, hi = (0.0, x_edge) if x0 == "north" else (x_edge, float(flow.x[-1]))
    xs = np.linspace(lo, hi, n_targets)
    p = BaseMeasure.from_terminal(flow, minimizer_terminal(flow, res))
    _, wfield = reduced_fields_wrt_measure(
        flow, p, (xs, [vals.t_half]), n_sigma=n_sigma, n_base=n_base, n_angles=n_angles, jobs=jobs
    )
    inside = (flow.x >= lo) & (flow.x <= hi)
    w_full = np.where(inside, np.interp(flow.x, xs, wfield.w[0]), 0.0)
    w_int = weighted_integral(m, flow.x, sl.f, sl.phi, w_full, lo, hi)
    u_int = chs.integral(vals.i_half, lo, hi)
    F0 = 1000.0 * A * A
    log_floor_bound = -0.5 * m * math.log(2.0 * math.pi * T) - 4.0 * m * math.exp(min(0.5 * F0, 700.0)) + math.log(vals.omega_a_inner)
    out.append(
        make_result(
            ids[2],
            w_int,
            u_int,
            tolerances.tol_w * u_int,
            digest,
            metadata={**meta, "w_integral": w_int, "u_integral": u_int, "log_explicit_bound_floor": log_floor_bound, "flags": int(wfield.flags.sum())},
        )
    )

    # log(log rhs) of 10^4 (2 pi)^{m/2} e^{4m e^{F0/2}} / |Omega_a'|
    small = math.log(1e4) + 0.5 * m * math.log(2.0 * math.pi) - math.log(vals.omega_a_inner)
    loglog_rhs = math.log(4.0 * m) + 0.5 * F0 + math.log1p(small * math.exp(-math.log(4.0 * m) - 0.5 * F0))
    log_diff = math.log(max(diff, LOG_FLOOR))
    out.append(
        make_result(
            ids[3],
            math.log(max(log_diff, LOG_FLOOR)),
            loglog_rhs,
            tol,
            digest,
            log_space=True,
            metadata={**meta, "scale": "log-log"},
        )
    )
    log_G0 = math.log(5.0 * m) + 500.0 * A * A
    out.append(_log_le_exp(ids[4], diff, -vals.nu_a + log_G0, tol, digest, meta))
    return out


def check_volume_propagation(
    flow: FlowSolution,
    x0: Pole,
    y0: Pole,
    r: float,
    A: float,
    tol: float = 1e-6,
) -> list[CheckResult]:
    """
    rho_c >= rho_a^{m+1} e^{-G0/rho_a} in log form, and on Ricci-flat flows the
    direct comparison rho_c >= rho_a (30A)^{-m}.
    """
    m, T = flow.m, flow.T
    digest = inputs_digest("volume-propagation", flow=flow_tag(flow), x0=x0, y0=y0, r=r, A=A)
    reason = _propagation_gates(flow, x0, y0, r, A)
    if reason is not None:
        return [skipped_result("propagation/volume-final", reason, digest)]
    root = math.sqrt(T)
    i_half = _half_slice(flow)
    rho_a = volume_ratio(flow.geometry_at(i_half), GeodesicBall(x0, 0.1 * root))
    rho_c = volume_ratio(flow.geometry_at(flow.n_slices - 1), GeodesicBall(y0, r))
    gap = (m + 1) * math.log(rho_a) - math.log(rho_c)
    log_bound = math.log(5.0 * m) + 500.0 * A * A - math.log(rho_a)
    meta = {"rho_a": rho_a, "rho_c": rho_c}
    out = [_log_le_exp("propagation/volume-final", gap, log_bound, tol, digest, meta)]
    if _ricci_flat(flow):
        out.append(check_ricci_flat_volume(flow, x0, y0, r, A, tol))
    return out


def _ricci_flat(flow: FlowSolution, tol: float = 1e-10) -> bool:
    return flow.kind == "static_euclidean" or all(float(np.max(c.rc_norm)) <= tol for c in flow.curvatures)


def check_ricci_flat_volume(flow: FlowSolution, x0: Pole, y0: Pole, r: float, A: float, tol: float = 1e-6) -> CheckResult:
    """log rho_c >= log rho_a - m log(30 A) on a Ricci-flat flow."""
    m, T = flow.m, flow.T
    digest = inputs_digest("ricci-flat-volume", flow=flow_tag(flow), x0=x0, y0=y0, r=r, A=A)
    if not _ricci_flat(flow):
        return skipped_result("propagation/ricci-flat-volume", "the flow is not Ricci-flat", digest)
    root = math.sqrt(T)
    i_half = _half_slice(flow)
    rho_a = volume_ratio(flow.geometry_at(i_half), GeodesicBall(x0, 0.1 * root))
    rho_c = volume_ratio(flow.geometry_at(flow.n_slices - 1), GeodesicBall(y0, r))
    return make_result(
        "propagation/ricci-flat-volume",
        math.log(rho_a) - m * math.log(30.0 * A),
        math.log(rho_c),
        tol,
        digest,
        log_space=True,
        metadata={"rho_a": rho_a, "rho_c": rho_c},
    )


def improved_nlc_log_kappa(m: int, A: float) -> float:
    """log of omega_m (10^{m+1} omega_m A)^{-(m+1)} e^{-500 10^{m+1} omega_m A^5}."""
    omega = unit_ball_constant(m)
    c = 10.0 ** (m + 1) * omega
    return math.log(omega) - (m + 1) * math.log(c * A) - 500.0 * c * A**5


def check_improved_nlc(
    flow: FlowSolution,
    x0: Pole,
    r0: float,
    x: Pole,
    r: float,
    A: float,
    tol: float = 1e-6,
) -> CheckResult:
    """
    r^{-m} |B_T(x, r)| >= kappa(m, A) at t = T under the bounded-geometry
    hypotheses around (x0, 0).
    """
    m, T = flow.m, flow.T
    last = flow.n_slices - 1
    digest = inputs_digest("improved-nlc", flow=flow_tag(flow), x0=x0, r0=r0, x=x, r=r, A=A)
    cid = "nlc/improved"
    if not r0 * r0 / A <= T <= r0 * r0:
        return skipped_result(cid, "T must lie in [r0^2/A, r0^2]", digest)
    if not 0 < r <= r0:
        return skipped_result(cid, "r must lie in (0, r0]", digest)
    rm = max(_sectional_sup(flow, i, x0, r0) for i in range(flow.n_slices))
    if r0 * r0 * rm > 1.0 / m:
        return skipped_result(cid, f"r0^2 |Rm| = {r0 * r0 * rm:.4g} exceeds 1/m", digest)
    geom0 = flow.geometry_at(0)
    if ball_volume(geom0, GeodesicBall(x0, r0)) / r0**m < 1.0 / A:
        return skipped_result(cid, "initial ball is collapsed beyond 1/A", digest)
    R_max = _max_on_ball(flow, last, x, r, flow.curvatures[last].R)
    if r * r * R_max > 1.0:
        return skipped_result(cid, "r^2 R exceeds 1 on the ball", digest)
    if not _contained(flow, last, (x, r), (x0, A * r0)):
        return skipped_result(cid, "the ball leaves B(x0, A r0)", digest)
    vol = ball_volume(flow.geometry_at(last), GeodesicBall(x, r))
    log_value = math.log(vol) - m * math.log(r)
    return make_result(cid, improved_nlc_log_kappa(m, A), log_value, tol, digest, log_space=True, metadata={"sup_rm": rm})


def check_reduced_estimate(flow: FlowSolution, x0: Pole, A: float, n_sigma: int = 64, samples: int = 3, tol: float = 1e-6) -> CheckResult:
    """l((y, T), (x, T/2)) <= 4m e^{F0/2} on the estimate's windows, in log form."""
    digest = inputs_digest("reduced-estimate", flow=flow_tag(flow), x0=x0, A=A, n_sigma=n_sigma, samples=samples)
    rep = reduced_distance_upper_report(flow, A, x0, n_sigma, samples)
    if not rep.hypothesis_ok:
        return skipped_result("reduced/upper-estimate", "curvature hypothesis fails", digest)
    return _log_le_exp("reduced/upper-estimate", rep.max_l, rep.log_bound, tol, digest, {"max_l": rep.max_l})


# ---------------------------------------------------------------------------
# suite
# ---------------------------------------------------------------------------


@dataclass
class SuiteContext:
    """Everything a check family needs from the run configuration."""

    config: RunConfig
    geom0: RadialGeometry
    flow: FlowSolution
    jobs: int = 1

    @property
    def tolerances(self) -> Tolerances:
        return self.config.tolerances

    @property
    def options(self) -> SolverOptions:
        return SolverOptions(tol_el=self.tolerances.tol_el, max_iters=self.config.solver.max_iters)

    @property
    def steps(self) -> int:
        return self.config.solver.steps_per_slice

    @property
    def n_points(self) -> int:
        return self.config.solver.nu_points

    def geometry(self, params: dict[str, Any]) -> RadialGeometry:
        i = int(params.get("slice", 0))
        return self.geom0 if i == 0 else self.flow.geometry_at(i % self.flow.n_slices)


def _ball(params: dict[str, Any], key: str = "ball") -> GeodesicBall:
    raw = params.get(key)
    if not isinstance(raw, dict) or "radius" not in raw:
        raise ConfigurationError(f"params.{key}", "expected {\"center\": ..., \"radius\": ...}")
    return GeodesicBall(raw.get("center", "north"), float(raw["radius"]))


def _opt_radius(params: dict[str, Any], key: str) -> Optional[float]:
    value = params.get(key)
    return None if value is None else float(value)


Family = Callable[[SuiteContext, dict[str, Any], bool], list[CheckResult]]


def _fam_tau_scaling(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    geom = ctx.geometry(p)
    dom = aligned_domain(geom, _ball(p))
    return check_tau_scaling(
        geom, dom, float(p["tau1"]), float(p["tau2"]), p.get("tol", ctx.tolerances.tol_check), ctx.n_points, ctx.options
    )


def _fam_volume_lower(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return check_volume_ratio_lower(ctx.geometry(p), _ball(p), p.get("tol", ctx.tolerances.tol_check), ctx.n_points, ctx.options)


def _fam_volume_equiv(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    geom, ball = ctx.geometry(p), _ball(p)
    override = None
    if control:
        m, r0 = geom.m, ball.radius
        K = curvature_bounds(geom, ball_domain(geom, GeodesicBall(ball.center, 5.0 * r0))).K
        lower = -10.0 * m * m * (1.0 + K * r0) + (m + 1) * math.log(volume_ratio(geom, ball))
        override = float(p.get("nu_bar", lower - 1.0))
    return check_volume_ratio_equiv(geom, ball, p.get("tol", ctx.tolerances.tol_check), ctx.n_points, ctx.options, nu_bar_override=override)


def _fam_inclusion(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return check_inclusion(
        ctx.geometry(p),
        p.get("center", "north"),
        p["radii"],
        float(p["tau"]),
        p.get("a_field", "zero"),
        float(p.get("min_gap", 0.0)),
        p.get("tol", ctx.tolerances.tol_check),
        ctx.options,
    )


def _fam_nu_nonpositive(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return check_nu_nonpositive(ctx.geometry(p), _ball(p), float(p["tau"]), float(p.get("tol", 1e-3)), ctx.n_points, ctx.options)


def _fam_exhaustion(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return check_exhaustion(
        ctx.geom0.m,
        p.get("radii", [2.0, 4.0, 8.0, 16.0]),
        float(p.get("tau", 1.0)),
        float(p.get("ds", ctx.geom0.ds)),
        float(p.get("limit", 5e-2)),
        p.get("tol", ctx.tolerances.tol_check),
        ctx.options,
    )


def _fam_sandwich(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return check_sandwich(ctx.geometry(p), _ball(p), float(p["tau"]), p.get("tol", ctx.tolerances.tol_check), ctx.options)


def _fam_symmetrization(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return check_symmetrization(
        ctx.geometry(p), _ball(p), float(p["tau"]), float(p.get("lam", 1.0)), p.get("tol", ctx.tolerances.tol_check), ctx.options
    )


def _fam_cutoff(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return check_cutoffs(p.get("A_values", [36.0, 100.0, 3000.0, 1e6]), control, float(p.get("F0", 1.0)))


def _fam_flow_hypothesis(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return [check_flow_hypothesis_bound(ctx.flow, p.get("x0", "north"), float(p["A"]))]


def _fam_distance(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return [check_distance_bound(ctx.flow, p.get("x0", "north"), float(p["A"]), p.get("tol", ctx.tolerances.tol_check))]


def _fam_harnack(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    ball = _ball(p) if "ball" in p else None
    return check_harnack_suite(
        ctx.flow,
        ball,
        float(p["tau_T"]),
        ctx.tolerances,
        p.get("terminal", "minimizer"),
        float(p.get("t_fraction", 0.9)),
        float(p.get("curve_c", 0.5)),
        ctx.steps,
        ctx.options,
    )


def _fam_effective_mu(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return check_effective_monotonicity(
        ctx.flow,
        p.get("center", "north"),
        float(p["inner_radius"]),
        _opt_radius(p, "radius_T"),
        float(p["tau_T"]),
        ctx.tolerances,
        p.get("tol"),
        ctx.steps,
        ctx.options,
    )


def _fam_effective_nu(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return check_effective_nu(
        ctx.flow,
        p.get("center", "north"),
        float(p["inner_radius"]),
        _opt_radius(p, "radius_T"),
        float(p["tau_T"]),
        ctx.tolerances,
        int(p.get("n_lambda", 4)),
        ctx.n_points,
        p.get("tol"),
        ctx.steps,
        ctx.options,
    )


def _fam_global(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return [check_global_monotonicity(ctx.flow, float(p["tau_T"]), float(p.get("tol", ctx.tolerances.tol_check)), p.get("slices"), ctx.options)]


def _fam_almost(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return check_almost_monotonicity(
        ctx.flow, p.get("x0", "north"), float(p["A"]), float(p["tau_T"]), ctx.tolerances, p.get("tol"), ctx.steps, ctx.options
    )


def _fam_local_nlc(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    kappa = float(p.get("kappa", 1.5)) if control else None
    return [
        check_local_nlc(
            ctx.flow,
            p.get("x0", "north"),
            float(p["A"]),
            p.get("x", "north"),
            float(p["r"]),
            p.get("tol", ctx.tolerances.tol_check),
            int(p.get("n_tau", 8)),
            kappa,
            ctx.options,
        )
    ]


def _fam_nu_propagation(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return check_nu_propagation(
        ctx.flow,
        p.get("x0", "north"),
        p.get("y0", "north"),
        float(p["r"]),
        float(p["A"]),
        ctx.tolerances,
        int(p.get("n_lambda", 3)),
        ctx.n_points,
        int(p.get("n_sigma", ctx.config.solver.n_sigma)),
        int(p.get("n_base", 8)),
        int(p.get("n_angles", 4)),
        int(p.get("n_targets", 5)),
        ctx.steps,
        ctx.jobs,
        ctx.options,
    )


def _fam_volume_propagation(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return check_volume_propagation(
        ctx.flow, p.get("x0", "north"), p.get("y0", "north"), float(p["r"]), float(p["A"]), p.get("tol", ctx.tolerances.tol_check)
    )


def _fam_ricci_flat(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return [
        check_ricci_flat_volume(
            ctx.flow, p.get("x0", "north"), p.get("y0", "north"), float(p["r"]), float(p["A"]), p.get("tol", ctx.tolerances.tol_check)
        )
    ]


def _fam_improved_nlc(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return [
        check_improved_nlc(
            ctx.flow,
            p.get("x0", "north"),
            float(p["r0"]),
            p.get("x", "north"),
            float(p["r"]),
            float(p["A"]),
            p.get("tol", ctx.tolerances.tol_check),
        )
    ]


def _fam_reduced(ctx: SuiteContext, p: dict[str, Any], control: bool) -> list[CheckResult]:
    return [
        check_reduced_estimate(
            ctx.flow, p.get("x0", "north"), float(p["A"]), int(p.get("n_sigma", ctx.config.solver.n_sigma)), int(p.get("samples", 3))
        )
    ]


FAMILIES: dict[str, Family] = {
    "flow-hypothesis": _fam_flow_hypothesis,
    "distance-evolution": _fam_distance,
    "inclusion": _fam_inclusion,
    "nu-nonpositive": _fam_nu_nonpositive,
    "exhaustion": _fam_exhaustion,
    "sandwich": _fam_sandwich,
    "symmetrization": _fam_symmetrization,
    "tau-scaling": _fam_tau_scaling,
    "volume-ratio-lower": _fam_volume_lower,
    "volume-ratio-equiv": _fam_volume_equiv,
    "harnack": _fam_harnack,
    "effective-monotonicity": _fam_effective_mu,
    "effective-nu": _fam_effective_nu,
    "global-monotonicity": _fam_global,
    "almost-monotonicity": _fam_almost,
    "local-nlc": _fam_local_nlc,
    "nu-propagation": _fam_nu_propagation,
    "volume-propagation": _fam_volume_propagation,
    "ricci-flat-volume": _fam_ricci_flat,
    "improved-nlc": _fam_improved_nlc,
    "cutoff": _fam_cutoff,
    "reduced-estimate": _fam_reduced,
}

# families with a falsification variant
CONTROLLABLE = frozenset({"volume-ratio-equiv", "local-nlc", "cutoff"})


def _family_name(check: CheckConfig) -> str:
    name = check.id.removeprefix("control/")
    if name not in FAMILIES:
        raise ConfigurationError(f"checks.{check.id}", "unknown check", f"Use one of {', '.join(sorted(FAMILIES))}")
    if check.is_control and name not in CONTROLLABLE:
        raise ConfigurationError(f"checks.{check.id}", "this check has no falsification control")
    return name


@dataclass(frozen=True)
class SuiteReport:
    """Results of one suite run in declared order."""

    results: list[CheckResult]
    config_hash: str
    flow_provenance: dict[str, Any]
    versions: dict[str, str]

    def all_passed(self) -> bool:
        return self.to_model().all_passed()

    def to_model(self, artifacts: Sequence[str] = (), timings: Optional[dict[str, float]] = None) -> SuiteReportModel:
        return SuiteReportModel(
            config_hash=self.config_hash,
            flow_provenance=_clean(self.flow_provenance),
            versions=self.versions,
            checks=[r.to_record() for r in self.results],
            artifacts=list(artifacts),
            timings=timings or {},
        )


def prepare_flow(config: RunConfig, cache_dir: Optional[Path] = None) -> tuple[RadialGeometry, FlowSolution]:
    """Initial geometry and flow, through the flow cache when one is configured."""
    geom0 = from_preset(config.geometry.preset, config.geometry.n_cells)
    cache = FlowCache(cache_dir) if cache_dir is not None and config.cache.enabled else None
    key = config.flow_key()
    if cache is not None:
        cached = cache.load(key)
        if cached is not None:
            return geom0, cached
    f = config.flow
    flow = evolve(geom0, FlowSpec(f.kind, f.T, f.k, f.lam, f.dt, f.n_slices))
    if cache is not None:
        cache.save(key, flow)
    return geom0, flow


def run_check(ctx: SuiteContext, check: CheckConfig) -> list[CheckResult]:
    """One configured family; domain problems become skipped results."""
    name = _family_name(check)
    control = check.is_control
    try:
        results = FAMILIES[name](ctx, dict(check.params), control)
    except DomainError as e:
        results = [skipped_result(name, e.message, inputs_digest(name, params=check.params))]
    if control:
        results = [r.as_control() for r in results]
    return results


def run_suite(
    config: RunConfig,
    jobs: int = 1,
    only: Optional[Sequence[str]] = None,
    cache_dir: Optional[Path] = None,
    flow: Optional[tuple[RadialGeometry, FlowSolution]] = None,
) -> SuiteReport:
    """
    Run every enabled check family of a config.

    Families run concurrently when jobs > 1; each family owns its solver
    caches, so results do not depend on scheduling.
    """
    checks = [c for c in config.checks if only is None or c.id in only or _family_name(c) in only]
    for c in checks:
        _family_name(c)
    geom0, sol = flow if flow is not None else prepare_flow(config, cache_dir)
    ctx = SuiteContext(config, geom0, sol, jobs=1 if jobs > 1 else jobs)
    logger.info("running %d check families on %s flow (T=%g)", len(checks), sol.kind, sol.T)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(lambda c: run_check(ctx, c), checks))
    else:
        batches = [run_check(ctx, c) for c in checks]
    results = [r for batch in batches for r in batch]
    versions = {
        "entropylab": _package_version("entropylab"),
        "numpy": np.__version__,
        "scipy": _package_version("scipy"),
    }
    report = SuiteReport(results, config.config_hash(), {**sol.provenance, "kind": sol.kind, "T": sol.T}, versions)
    failed = [r.id for r in results if not r.passed and not r.skipped]
    logger.info("suite finished: %d results, %d failed", len(results), len(failed))
    return report
