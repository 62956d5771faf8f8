"""Radial bound states of (q u')' + q f(u) = 0 via shooting.

Weights, nonlinearities, hypothesis audits, IVP integration with event
detection, level-parameterized functionals, membership classification,
and a deterministic CLI for reproducible experiments.
"""

__version__ = "0.1.0"

from .errors import (
    BoundStatesError,
    BracketError,
    ConfigError,
    DomainError,
    IntegrationToleranceError,
    NumericError,
    SingularWindowError,
    TailNotIntegrableError,
    UndecidedError,
)
from .weights import (
    PiecewiseLogWeight,
    PowerSumWeight,
    PowerWeight,
    QuadratureWeight,
    TabulatedWeight,
    Weight,
    WeightConstants,
    WeightValues,
    weight_constants,
)
from .nonlin import CustomNonlinearity, Nonlinearity, PowerMinusLinear, find_b_beta
from .hypotheses import (
    HypothesisReport,
    HypothesisResult,
    certify_theorems,
    check_f_hypotheses,
    check_q_hypotheses,
    full_report,
)
from .shooting import (
    EventRecord,
    Markers,
    Problem,
    TailResult,
    Trajectory,
    asymptotic_tail_test,
    extract_markers,
    integrate,
    series_start,
)
from .variation import (
    PhiPropositionReport,
    VariationTrajectory,
    check_phi_propositions,
    first_zero_of_phi,
    integrate_variation,
)
from .functionals import (
    BranchInverse,
    FunctionalTrace,
    MonitorReport,
    branch_inverse,
    eval_P,
    eval_Pbar,
    eval_S12,
    eval_T,
    eval_W_family,
    monotonicity_monitor,
    s_threshold,
    trace_S12,
    trace_functional,
)
from .classify import (
    BoundStateBracket,
    ClassificationResult,
    SeparationReport,
    SweepResult,
    classify,
    find_kth_bound_state,
    intersection_scan,
    uniqueness_sweep,
    verify_separation,
)
from .config import RunConfig, build_problem, load_config

__all__ = [
    "__version__",
    "BoundStatesError", "BracketError", "ConfigError", "DomainError",
    "IntegrationToleranceError", "NumericError", "SingularWindowError",
    "TailNotIntegrableError", "UndecidedError",
    "Weight", "WeightValues", "WeightConstants", "PowerWeight",
    "PowerSumWeight", "PiecewiseLogWeight", "TabulatedWeight",
    "QuadratureWeight", "weight_constants",
    "Nonlinearity", "PowerMinusLinear", "CustomNonlinearity", "find_b_beta",
    "HypothesisResult", "HypothesisReport", "check_q_hypotheses",
    "check_f_hypotheses", "certify_theorems", "full_report",
    "Problem", "Trajectory", "EventRecord", "Markers", "TailResult",
    "series_start", "integrate", "extract_markers", "asymptotic_tail_test",
    "VariationTrajectory", "PhiPropositionReport", "integrate_variation",
    "first_zero_of_phi", "check_phi_propositions",
    "BranchInverse", "FunctionalTrace", "MonitorReport", "branch_inverse",
    "eval_P", "eval_Pbar", "eval_S12", "eval_W_family", "eval_T",
    "s_threshold", "trace_functional", "trace_S12", "monotonicity_monitor",
    "ClassificationResult", "BoundStateBracket", "SweepResult",
    "SeparationReport", "classify", "find_kth_bound_state",
    "uniqueness_sweep", "verify_separation", "intersection_scan",
    "RunConfig", "load_config", "build_problem",
]
