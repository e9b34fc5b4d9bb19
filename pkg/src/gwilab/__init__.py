"""Numerical laboratory for critical branching processes with immigration.

Exact finite-n laws through generating-function iteration, harmonic moments
by two independent routes, closed-form and quadrature limit constants,
regime classification for large deviations of normalized random sums, and a
reproducible sharded Monte Carlo engine.
"""

__version__ = "0.1.0"

from .model import (
    CriticalityViolation,
    DegenerateLaw,
    DistributionKind,
    DistributionSpec,
    ModelParams,
    PeriodicSupport,
    pgf_coefficients,
    validate_condition_A,
)
from .series import (
    IterationTrace,
    NegativeCoefficient,
    TruncatedSeries,
    TruncationOverflow,
    compose,
    evaluate,
    iterate_pgf,
    linear_fractional_oracle,
    pgf_of_Zn,
)
from .exact import (
    LawOfZn,
    MuEstimate,
    NonConvergent,
    QuadratureFailure,
    ZeroSurvival,
    brute_force_law,
    harmonic_moment_integral,
    harmonic_moment_sum,
    law_of_Zn,
    mu_coefficient,
)
from .limits import (
    EpsilonSpec,
    LimitConstants,
    ModelRequired,
    MomentCondition,
    OutOfScope,
    Regime,
    RegimeReport,
    classify_regime,
    I_constant,
    sample_limit_law,
    scaling_A,
    upsilon,
)
from .simulate import (
    IncrementKind,
    IncrementLaw,
    MCEstimate,
    estimate_large_deviation,
    fuk_nagaev_bound,
    sample_increments,
    simulate_Zn_path,
)
from .experiments import (
    ConvergenceRow,
    ExperimentConfig,
    Study,
    StudyResult,
    run_study,
)

__all__ = [
    "__version__",
    "CriticalityViolation", "DegenerateLaw", "DistributionKind",
    "DistributionSpec", "ModelParams", "PeriodicSupport",
    "pgf_coefficients", "validate_condition_A",
    "IterationTrace", "NegativeCoefficient", "TruncatedSeries",
    "TruncationOverflow", "compose", "evaluate", "iterate_pgf",
    "linear_fractional_oracle", "pgf_of_Zn",
    "LawOfZn", "MuEstimate", "NonConvergent", "QuadratureFailure",
    "ZeroSurvival", "brute_force_law", "harmonic_moment_integral",
    "harmonic_moment_sum", "law_of_Zn", "mu_coefficient",
    "EpsilonSpec", "LimitConstants", "ModelRequired", "MomentCondition",
    "OutOfScope", "Regime", "RegimeReport", "classify_regime", "I_constant",
    "sample_limit_law", "scaling_A", "upsilon",
    "IncrementKind", "IncrementLaw", "MCEstimate",
    "estimate_large_deviation", "fuk_nagaev_bound", "sample_increments",
    "simulate_Zn_path",
    "ConvergenceRow", "ExperimentConfig", "Study", "StudyResult", "run_study",
]
