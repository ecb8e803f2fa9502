"""Sparse A-optimal experimental designs via group-lasso selection."""

from .analysis import (
    BiasedEstimatorError,
    DesignMatrix,
    MonteCarloReport,
    OracleResult,
    UnbiasednessReport,
    brute_force_a_optimal,
    check_unbiasedness,
    design_equivalent,
    design_from_solution,
    min_norm_least_squares,
    monte_carlo_estimator_check,
    oa_strength_check,
    variance_sum,
)
from .design import (
    CandidateSet,
    Factor,
    ModelMatrix,
    ModelSpec,
    ModelTerm,
    SpecificationError,
    build_model_matrix,
    duplicate_columns,
    enumerate_full_factorial,
    evaluate_term,
)
from .solver import (
    GroupLassoProblem,
    InfeasibleError,
    Solution,
    SolverOptions,
    extract_support,
    group_soft_threshold,
    objective_value,
    solve,
    solve_constrained,
    solve_relaxed,
)
from .weights import WeightTrace, algorithm1_weights, projection_norm_sq, scale_weights

__version__ = "0.1.0"

__all__ = [
    "BiasedEstimatorError",
    "CandidateSet",
    "DesignMatrix",
    "Factor",
    "GroupLassoProblem",
    "InfeasibleError",
    "ModelMatrix",
    "ModelSpec",
    "ModelTerm",
    "MonteCarloReport",
    "OracleResult",
    "Solution",
    "SolverOptions",
    "SpecificationError",
    "UnbiasednessReport",
    "WeightTrace",
    "algorithm1_weights",
    "brute_force_a_optimal",
    "build_model_matrix",
    "check_unbiasedness",
    "design_equivalent",
    "design_from_solution",
    "duplicate_columns",
    "enumerate_full_factorial",
    "evaluate_term",
    "extract_support",
    "group_soft_threshold",
    "min_norm_least_squares",
    "monte_carlo_estimator_check",
    "oa_strength_check",
    "objective_value",
    "projection_norm_sq",
    "scale_weights",
    "solve",
    "solve_constrained",
    "solve_relaxed",
    "variance_sum",
]
