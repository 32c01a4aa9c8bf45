"""freqlab: numerical laboratory for weighted frequency functions.

Measures Almgren-type frequency functions built from degenerate-weight
integrals of solutions to -div(A grad u) + W . grad u + V u = 0, and checks
the quantitative consequences: derivative identities, almost-monotonicity,
three-ball inequalities, vanishing-order slopes and iterated decay bounds.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    DegenerateSolutionError,
    EvaluationError,
    FitFailureError,
    FreqlabError,
    PreconditionError,
    QuadratureDomainError,
    ScenarioError,
    SolverError,
)
from .quad import (
    BallDomain,
    BallRule,
    DerivativeIdentityReport,
    RadialGrid,
    WeightSpec,
    centered_ball,
    check_derivative_identity,
    exactness_degree,
    fd_weights,
    integrate_weighted,
    radial_derivative,
    unit_ball_rule,
    weight,
)
from .fields import (
    AffineNormalization,
    CoefficientField,
    FieldValidationReport,
    StructureConstants,
    ball_samples,
    check_structure_constants,
    diagonal_linear_field,
    identity_field,
    mu_values,
    mu_z,
    normalize_at,
    rotation_perturbation_field,
    validate,
)
from .solutions import (
    SolutionField,
    SolvedGrid,
    drift_solution,
    exponential_solution,
    from_callables,
    harmonic_polynomial,
    load_solved_grid,
    oscillatory_solution,
    pde_residual,
    perturbed_exponential_solution,
    pullback,
    save_solved_grid,
    solve_dirichlet,
)
from .certify import (
    CertifyConfig,
    GateCheck,
    IterationReport,
    IterationStep,
    ThreeBallReport,
    VanishingReport,
    ball_mass,
    ball_norm,
    classical_kappa,
    fit_c0,
    fit_c0_bundle,
    iteration_gates,
    landis_iteration,
    three_ball_classical,
    three_ball_variable,
    vanishing_order,
    variable_kappa,
    weighted_unweighted_sandwich,
)
from .frequency import (
    DerivativeResidualReport,
    FrequencyBundle,
    FrequencySlackReport,
    MonotonicityReport,
    bundle_csv,
    check_H_derivative,
    check_N_derivative_bound,
    classical_bundle,
    default_alpha,
    geometric_radii,
    monotonicity_budget,
    radial_pairing_integral,
    variable_bundle,
    verify_monotonicity,
    with_c0,
    write_bundle_csv,
)
from .scenario import (
    Scenario,
    TaskSpec,
    build_domain,
    build_field,
    build_solution,
    compile_expression,
    load_scenario,
    scenario_from_mapping,
)

__all__ = [
    "__version__",
    "FreqlabError",
    "QuadratureDomainError",
    "EvaluationError",
    "PreconditionError",
    "DegenerateSolutionError",
    "SolverError",
    "FitFailureError",
    "ScenarioError",
    "BallDomain",
    "BallRule",
    "WeightSpec",
    "RadialGrid",
    "DerivativeIdentityReport",
    "centered_ball",
    "unit_ball_rule",
    "integrate_weighted",
    "weight",
    "radial_derivative",
    "fd_weights",
    "check_derivative_identity",
    "exactness_degree",
    "CoefficientField",
    "FieldValidationReport",
    "StructureConstants",
    "AffineNormalization",
    "identity_field",
    "diagonal_linear_field",
    "rotation_perturbation_field",
    "mu_z",
    "mu_values",
    "ball_samples",
    "validate",
    "check_structure_constants",
    "normalize_at",
    "SolutionField",
    "SolvedGrid",
    "from_callables",
    "pde_residual",
    "harmonic_polynomial",
    "exponential_solution",
    "oscillatory_solution",
    "drift_solution",
    "perturbed_exponential_solution",
    "pullback",
    "solve_dirichlet",
    "save_solved_grid",
    "load_solved_grid",
    "FrequencyBundle",
    "MonotonicityReport",
    "DerivativeResidualReport",
    "FrequencySlackReport",
    "classical_bundle",
    "variable_bundle",
    "geometric_radii",
    "default_alpha",
    "radial_pairing_integral",
    "check_H_derivative",
    "check_N_derivative_bound",
    "verify_monotonicity",
    "monotonicity_budget",
    "with_c0",
    "bundle_csv",
    "write_bundle_csv",
    "CertifyConfig",
    "ThreeBallReport",
    "VanishingReport",
    "GateCheck",
    "IterationStep",
    "IterationReport",
    "ball_mass",
    "ball_norm",
    "classical_kappa",
    "variable_kappa",
    "three_ball_classical",
    "three_ball_variable",
    "weighted_unweighted_sandwich",
    "vanishing_order",
    "iteration_gates",
    "landis_iteration",
    "fit_c0",
    "fit_c0_bundle",
    "Scenario",
    "TaskSpec",
    "build_domain",
    "build_field",
    "build_solution",
    "compile_expression",
    "load_scenario",
    "scenario_from_mapping",
]
