"""Exact analysis of Wald's sequential probability ratio test when the
null distribution is phase-type and the alternative is its exponential
tilt.

The test's decision errors, expected sample count, and sample-count
transform are expressed through matrix-valued scale functions of a
drift-and-jump Markov additive process; this package evaluates those
quantities exactly (closed form for Erlang input, transform inversion
otherwise), inverts them for target error rates, traces the region where
interior boundaries exist, and solves the prior-weighted penalty
formulation.  A seeded Monte Carlo module validates every analytic value.
"""

from .exceptions import (
    AllCapped,
    DegenerateTargets,
    IllConditionedSolve,
    InversionDiverged,
    NoConvergence,
    NonStochasticInitial,
    NotSubgenerator,
    NumericalError,
    OutsideOptimalityRegion,
    ScaleEvaluationFailed,
    SeriesOverflow,
    SingularGenerator,
    SingularTransform,
    SprtExactError,
    ValidationError,
)
from .phasetype import (
    PhaseTypeDist,
    TiltResult,
    density,
    erlang,
    from_spec_dict,
    lst,
    sample,
    tilt,
    validate,
)
from .scale import (
    MapModel,
    ScaleMatrix,
    erlang_w,
    erlang_w_integral,
    f_matrix,
    general_w,
    general_w_integral,
    scale_matrix,
    tilted_w,
    z_matrix,
)
from .sim import Estimate, SimConfig, SimResult, run, sample_path
from .solver import (
    NonUniqueFlag,
    PenaltySpec,
    PosteriorBoundaries,
    RegionBoundary,
    bayes_optimal,
    optimality_region,
    penalty,
    posterior_boundaries,
    solve_boundaries,
)
from .sprt import (
    Boundaries,
    ErrorPair,
    TestProblem,
    b_bounds,
    errors,
    expected_n,
    make_problem,
    pgf_n,
    wald_bounds,
)

__version__ = "0.1.0"

__all__ = [
    "AllCapped",
    "Boundaries",
    "DegenerateTargets",
    "ErrorPair",
    "Estimate",
    "IllConditionedSolve",
    "InversionDiverged",
    "MapModel",
    "NoConvergence",
    "NonStochasticInitial",
    "NonUniqueFlag",
    "NotSubgenerator",
    "NumericalError",
    "OutsideOptimalityRegion",
    "PenaltySpec",
    "PhaseTypeDist",
    "PosteriorBoundaries",
    "RegionBoundary",
    "ScaleEvaluationFailed",
    "ScaleMatrix",
    "SeriesOverflow",
    "SimConfig",
    "SimResult",
    "SingularGenerator",
    "SingularTransform",
    "SprtExactError",
    "TestProblem",
    "TiltResult",
    "ValidationError",
    "b_bounds",
    "bayes_optimal",
    "density",
    "erlang",
    "erlang_w",
    "erlang_w_integral",
    "errors",
    "expected_n",
    "f_matrix",
    "from_spec_dict",
    "general_w",
    "general_w_integral",
    "lst",
    "make_problem",
    "optimality_region",
    "penalty",
    "pgf_n",
    "posterior_boundaries",
    "run",
    "sample",
    "sample_path",
    "scale_matrix",
    "solve_boundaries",
    "tilt",
    "tilted_w",
    "validate",
    "wald_bounds",
    "z_matrix",
]
