# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

"""
Command-line interface for entropylab.

Every command reads a run config, works in its output directory and writes
JSON/CSV artifacts there. Library errors become exit status 1 with the
message on stderr.
"""

from __future__ import annotations

import json
import logging
import sys
from functools import wraps
from pathlib import Path
from typing import Any, Callable, Optional, TypeVar

import click
import numpy as np
import pandas as pd

from .cache import resolve_cache_dir
from .conjugate_heat import (
    compute_harnack_fields,
    differential_harnack_along_curve,
    gaussian_terminal,
    minimizer_terminal,
    solve_conjugate,
)
from .cutoff import make_bounded_cutoff, make_unbounded_cutoff
from .entropy import SolverOptions, compute_nu, minimize_mu
from .exceptions import EntropyLabError
from .exports import Timer, write_csv, write_json, write_report, write_series
from .flow import FlowSolution, scalar_curvature_floor
from .geometry import GeodesicBall, RadialDomain, RadialGeometry
from .models import RunConfig, get_json_schema
from .reduced import BaseMeasure, reduced_fields_wrt_measure
from .verify import aligned_domain, check_cutoffs, prepare_flow, run_suite

logger = logging.getLogger(__name__)

F = TypeVar("F", bound=Callable[..., Any])


def _handle_errors(func: F) -> F:
    @wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except EntropyLabError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(1)

    return wrapper  # type: ignore[return-value]


def _load(config_path: str, out: Optional[str]) -> tuple[RunConfig, Path]:
    config = RunConfig.from_file(Path(config_path))
    out_dir = Path(out or config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return config, out_dir


def _options(config: RunConfig) -> SolverOptions:
    return SolverOptions(tol_el=config.tolerances.tol_el, max_iters=config.solver.max_iters)


def _flow(config: RunConfig, cache: Optional[str]) -> tuple[RadialGeometry, FlowSolution]:
    cache_dir = resolve_cache_dir(cache or config.cache.directory)
    return prepare_flow(config, cache_dir)


def _slice_geometry(flow: FlowSolution, geom0: RadialGeometry, index: int) -> RadialGeometry:
    return geom0 if index == 0 else flow.geometry_at(index % flow.n_slices)


config_option = click.option(
    "--config", "-c", "config_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Run config JSON"
)
out_option = click.option("--out", "-o", help="Output directory (defaults to the config's output_dir)")
cache_option = click.option("--cache", help="Flow cache directory (ENTROPYLAB_CACHE takes precedence)")


@click.group()
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default="WARNING",
    help="Root logger level",
)
def cli(log_level: str) -> None:
    """Localized entropy experiments on rotationally symmetric Ricci flows."""
    logging.basicConfig(level=getattr(logging, log_level.upper()), format="%(asctime)s %(name)s %(levelname)s %(message)s")


@cli.command()
@config_option
@out_option
@cache_option
@_handle_errors
def flow(config_path: str, out: Optional[str], cache: Optional[str]) -> None:
    """Evolve (or load) the configured flow and print its provenance."""
    config, out_dir = _load(config_path, out)
    timer = Timer()
    with timer.phase("flow"):
        _, sol = _flow(config, cache)
    floor = scalar_curvature_floor(sol)
    frame = pd.DataFrame(
        {
            "t": sol.times,
            "r_min": floor,
            "max_warp": np.max(sol.warp, axis=1),
        }
    )
    csv_path = write_csv(frame, out_dir / "flow_slices.csv")
    series = write_series(out_dir / "r_min.json", sol.times, floor, "min R")
    write_json(
        out_dir / "flow.json",
        {"provenance": sol.provenance, "kind": sol.kind, "T": sol.T, "artifacts": [str(csv_path), str(series)], "timings": timer.summary()},
    )
    click.echo(json.dumps({"kind": sol.kind, "T": sol.T, **sol.provenance}, indent=2, sort_keys=True, default=str))


@cli.command()
@config_option
@out_option
@cache_option
@click.option("--tau", type=float, required=True, help="Scale tau")
@click.option("--radius", type=float, help="Geodesic ball radius (whole manifold if omitted)")
@click.option("--center", type=click.Choice(["north", "south"]), default="north")
@click.option("--a-field", type=click.Choice(["zero", "scalar"]), default="scalar")
@click.option("--slice", "slice_index", type=int, default=0, help="Flow slice holding the geometry")
@click.option("--nu", "with_nu", is_flag=True, help="Also compute nu over (0, tau]")
@click.option("--jobs", "-j", type=int, default=1, help="Worker threads for nu samples")
@_handle_errors
def entropy(
    config_path: str,
    out: Optional[str],
    cache: Optional[str],
    tau: float,
    radius: Optional[float],
    center: str,
    a_field: str,
    slice_index: int,
    with_nu: bool,
    jobs: int,
) -> None:
    """Localized mu (and optionally nu) on one domain."""
    config, out_dir = _load(config_path, out)
    timer = Timer()
    geom0, sol = _flow(config, cache)
    geom = _slice_geometry(sol, geom0, slice_index)
    dom = RadialDomain(0.0, geom.s_max) if radius is None else aligned_domain(geom, GeodesicBall(center, radius))  # type: ignore[arg-type]
    options = _options(config)
    with timer.phase("mu"):
        res = minimize_mu(geom, a_field, dom, tau, options)  # type: ignore[arg-type]
    artifacts = [str(write_csv(res.minimizer.to_frame(), out_dir / "minimizer.csv"))]
    payload: dict[str, Any] = {"mu": res.summary()}
    if with_nu:
        with timer.phase("nu"):
            nu = compute_nu(geom, a_field, dom, tau, config.solver.nu_points, jobs=jobs, options=options)  # type: ignore[arg-type]
        payload["nu"] = {"nu": nu.nu, "tau": nu.tau, "argmin": nu.argmin, "approximate": nu.approximate}
        artifacts.append(str(write_csv(nu.to_frame(), out_dir / "nu_samples.csv")))
        artifacts.append(str(write_series(out_dir / "mu_vs_s.json", nu.samples, nu.mu_values, "mu(s)")))
    payload.update(artifacts=artifacts, timings=timer.summary())
    write_json(out_dir / "entropy.json", payload)
    click.echo(f"mu = {res.mu:.10g} (converged: {res.converged})")
    if with_nu:
        click.echo(f"nu = {payload['nu']['nu']:.10g} at s = {payload['nu']['argmin']:.6g}")


@cli.command()
@config_option
@out_option
@cache_option
@click.option("--tau-T", "tau_T", type=float, required=True, help="Terminal scale")
@click.option("--terminal", type=click.Choice(["minimizer", "gaussian"]), default="minimizer")
@click.option("--radius", type=float, help="Terminal domain radius (whole manifold if omitted)")
@click.option("--curve-c", type=float, default=0.5, help="Test curve x = c sqrt(tau)")
@_handle_errors
def harnack(
    config_path: str,
    out: Optional[str],
    cache: Optional[str],
    tau_T: float,
    terminal: str,
    radius: Optional[float],
    curve_c: float,
) -> None:
    """Conjugate heat solution, Harnack fields and their margins."""
    config, out_dir = _load(config_path, out)
    timer = Timer()
    _, sol = _flow(config, cache)
    if terminal == "gaussian":
        data, mu = gaussian_terminal(sol, tau_T), 0.0
    else:
        geomT = sol.geometry_at(sol.n_slices - 1)
        dom = RadialDomain(0.0, geomT.s_max) if radius is None else aligned_domain(geomT, GeodesicBall("north", radius))
        with timer.phase("mu"):
            res = minimize_mu(geomT, "scalar", dom, tau_T, _options(config))
        data, mu = minimizer_terminal(sol, res), res.mu
    with timer.phase("conjugate"):
        chs = solve_conjugate(sol, data, steps_per_slice=config.solver.steps_per_slice, tol_mass=config.tolerances.tol_mass)
        fields = compute_harnack_fields(chs, mu)
    curve = differential_harnack_along_curve(chs, mu, lambda tau: curve_c * np.sqrt(tau))
    artifacts = [
        str(write_csv(chs.to_frame(), out_dir / "conjugate_heat.csv")),
        str(write_csv(fields.to_frame(sol.x), out_dir / "harnack_fields.csv")),
        str(write_csv(curve.to_frame(), out_dir / "harnack_curve.csv")),
    ]
    margins = {
        "mu": mu,
        "max_v_ratio": fields.max_v_ratio(0.9 * sol.T),
        "max_abs_v_ratio": fields.max_abs_v_ratio(0.9 * sol.T),
        "masked_fraction": fields.masked_fraction,
        "curve_min_margin": curve.min_margin,
        "mass_drift": float(np.max(np.abs(chs.masses - 1.0))),
    }
    write_json(out_dir / "harnack.json", {"margins": margins, "artifacts": artifacts, "timings": timer.summary()})
    click.echo(json.dumps(margins, indent=2, default=str))


@cli.command()
@config_option
@out_option
@cache_option
@click.option("--tau-T", "tau_T", type=float, required=True, help="Scale of the Gaussian base measure")
@click.option("--targets", type=int, default=8, help="Radial target points per time")
@click.option("--times", "n_times", type=int, default=3, help="Target times in (0, T)")
@click.option("--n-base", type=int, default=16)
@click.option("--n-angles", type=int, default=8)
@click.option("--jobs", "-j", type=int, default=1)
@_handle_errors
def reduced(
    config_path: str,
    out: Optional[str],
    cache: Optional[str],
    tau_T: float,
    targets: int,
    n_times: int,
    n_base: int,
    n_angles: int,
    jobs: int,
) -> None:
    """Reduced distance and reduced volume density fields against a Gaussian base measure."""
    config, out_dir = _load(config_path, out)
    timer = Timer()
    _, sol = _flow(config, cache)
    xs = np.linspace(float(sol.x[0]), float(sol.x[-1]), targets)
    ts = np.linspace(0.0, sol.T, n_times + 2)[1:-1]
    with timer.phase("reduced"):
        _, wfield = reduced_fields_wrt_measure(
            sol,
            BaseMeasure.gaussian(sol, tau_T),
            (xs, ts),
            n_sigma=config.solver.n_sigma,
            n_base=n_base,
            n_angles=n_angles,
            jobs=jobs,
        )
    path = write_csv(wfield.to_frame(), out_dir / "reduced_fields.csv")
    summary = {"flagged": int(wfield.flags.sum()), "max_w": float(np.max(wfield.w)), **wfield.diagnostics}
    write_json(out_dir / "reduced.json", {"summary": summary, "artifacts": [str(path)], "timings": timer.summary()})
    click.echo(json.dumps(summary, indent=2, default=str))


@cli.command()
@config_option
@out_option
@click.option("--A", "A_values", type=float, multiple=True, help="Values of A (repeatable)")
@_handle_errors
def cutoff(config_path: str, out: Optional[str], A_values: tuple[float, ...]) -> None:
    """Cutoff tables and their certification margins."""
    _, out_dir = _load(config_path, out)
    values = list(A_values) or [36.0, 100.0, 3000.0, 1e6]
    artifacts = [str(write_csv(make_bounded_cutoff().to_frame(), out_dir / "cutoff_bounded.csv"))]
    for A in values:
        artifacts.append(str(write_csv(make_unbounded_cutoff(A).to_frame(), out_dir / f"cutoff_unbounded_{A:g}.csv")))
    results = check_cutoffs(values)
    write_json(
        out_dir / "cutoff.json",
        {"checks": [r.to_record().model_dump(mode="json") for r in results], "artifacts": artifacts},
    )
    for r in results:
        margin = "n/a" if r.margin is None else f"{r.margin:.6g}"
        click.echo(f"{'PASS' if r.passed else 'FAIL'} {r.id} margin={margin}")
    if not all(r.passed for r in results):
        sys.exit(1)


@cli.command()
@config_option
@out_option
@cache_option
@click.option("--jobs", "-j", type=int, default=1, help="Check families run concurrently")
@click.option("--checks", help="Comma-separated check families to run")
@click.option("--format", "-f", type=click.Choice(["text", "json"]), default="text", help="Output format")
@_handle_errors
def verify(
    config_path: str,
    out: Optional[str],
    cache: Optional[str],
    jobs: int,
    checks: Optional[str],
    format: str,
) -> None:
    """Run the configured inequality checks; exit 0 iff every check passes."""
    config, out_dir = _load(config_path, out)
    only = [c.strip() for c in checks.split(",")] if checks else None
    timer = Timer()
    with timer.phase("flow"):
        flow_pair = _flow(config, cache)
    with timer.phase("checks"):
        report = run_suite(config, jobs=jobs, only=only, flow=flow_pair)
    artifacts = [str(out_dir / "report.json"), str(out_dir / "checks.csv")]
    model = report.to_model(artifacts, timer.summary())
    write_report(model, out_dir)
    click.echo(model.render(format))
    if not model.all_passed():
        sys.exit(1)


@cli.command()
def schema() -> None:
    """Print the JSON schemas of the run config and the report."""
    click.echo(json.dumps(get_json_schema(), indent=2))


if __name__ == "__main__":
    cli()
