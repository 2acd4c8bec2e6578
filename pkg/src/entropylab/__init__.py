# SPDX-License-Identifier: MIT
# Copyright (c) 2024 MusicScope

from .conjugate_heat import (
    ConjugateHeatSolution,
    HarnackFields,
    TerminalData,
    compute_harnack_fields,
    differential_harnack_along_curve,
    gaussian_terminal,
    integrated_harnack,
    minimizer_terminal,
    solve_conjugate,
)
from .cutoff import (
    BoundedCutoff,
    UnboundedCutoff,
    make_bounded_cutoff,
    make_unbounded_cutoff,
    verify_psi_inequality,
)
from .entropy import (
    MuResult,
    NuResult,
    SolverOptions,
    TrialFunction,
    compute_nu,
    equimeasurable_rearrangement,
    eval_W,
    minimize_mu,
)
from .exceptions import (
    ConfigurationError,
    ConstructionError,
    DomainError,
    EntropyLabError,
    HorizonTruncatedError,
    SolverAccuracyError,
    ValidationError,
)
from .flow import FlowSolution, FlowSpec, check_distance_evolution, check_flow_hypothesis, evolve
from .geometry import (
    GeodesicBall,
    RadialDomain,
    RadialGeometry,
    ball_volume,
    compute_curvature,
    euclidean,
    from_preset,
    perturbed_sphere,
    round_sphere,
    volume_ratio,
)
from .models import RunConfig, SuiteReportModel, Tolerances, get_json_schema
from .reduced import (
    BaseMeasure,
    ReducedDistanceResult,
    ReducedVolumeDensityField,
    SpaceTimeCurve,
    reduced_distance,
    reduced_fields_wrt_measure,
)
from .verify import CheckResult, SuiteReport, run_suite

__version__ = "0.1.0"

__all__ = [
    # geometry
    "RadialGeometry",
    "GeodesicBall",
    "RadialDomain",
    "compute_curvature",
    "ball_volume",
    "volume_ratio",
    "euclidean",
    "round_sphere",
    "perturbed_sphere",
    "from_preset",
    # flow
    "FlowSpec",
    "FlowSolution",
    "evolve",
    "check_flow_hypothesis",
    "check_distance_evolution",
    # entropy
    "TrialFunction",
    "SolverOptions",
    "MuResult",
    "NuResult",
    "eval_W",
    "minimize_mu",
    "compute_nu",
    "equimeasurable_rearrangement",
    # conjugate heat
    "TerminalData",
    "ConjugateHeatSolution",
    "HarnackFields",
    "gaussian_terminal",
    "minimizer_terminal",
    "solve_conjugate",
    "compute_harnack_fields",
    "differential_harnack_along_curve",
    "integrated_harnack",
    # reduced
    "SpaceTimeCurve",
    "ReducedDistanceResult",
    "ReducedVolumeDensityField",
    "BaseMeasure",
    "reduced_distance",
    "reduced_fields_wrt_measure",
    # cutoff
    "BoundedCutoff",
    "UnboundedCutoff",
    "make_bounded_cutoff",
    "make_unbounded_cutoff",
    "verify_psi_inequality",
    # verify
    "CheckResult",
    "SuiteReport",
    "run_suite",
    # config
    "RunConfig",
    "Tolerances",
    "SuiteReportModel",
    "get_json_schema",
    # errors
    "EntropyLabError",
    "ValidationError",
    "ConfigurationError",
    "DomainError",
    "HorizonTruncatedError",
    "SolverAccuracyError",
    "ConstructionError",
]
