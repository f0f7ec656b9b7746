"""Ergodic and discounted HJB/Pucci problems on truncated grids."""

__version__ = "0.1.0"

from .core import (CoefficientFns, Coefficients, ConfigError, ControlSet, Grid, Mode,
                   ProblemSpec, ScalarField, build_grid, make_problem, sample_coefficients)
from .operators import (PucciParams, RadialProfile, hjb_hamiltonian, pucci_minus, pucci_plus,
                        radial_hessian_eigs)
from .conditions import ConditionId, ConditionReport, check_condition, suggest_lyapunov, \
    verify_supersolution
from .scheme import BoundaryClosure, DiscreteOperator, apply, discretize
from .solver import DiscountedSolve, ParabolicRun, SolverError, march_parabolic, solve_discounted
from .ergodic import ErgodicResult, growth_diagnostics, uniqueness_probe, vanishing_discount
from .oracle import dense_solve, gaussian_average, mc_discounted_value, pucci_sampling

__all__ = [
    "CoefficientFns", "Coefficients", "ConfigError", "ControlSet", "Grid", "Mode", "ProblemSpec",
    "ScalarField", "build_grid", "make_problem", "sample_coefficients",
    "PucciParams", "RadialProfile", "hjb_hamiltonian", "pucci_minus", "pucci_plus",
    "radial_hessian_eigs",
    "ConditionId", "ConditionReport", "check_condition", "suggest_lyapunov", "verify_supersolution",
    "BoundaryClosure", "DiscreteOperator", "apply", "discretize",
    "DiscountedSolve", "ParabolicRun", "SolverError", "march_parabolic", "solve_discounted",
    "ErgodicResult", "growth_diagnostics", "uniqueness_probe", "vanishing_discount",
    "dense_solve", "gaussian_average", "mc_discounted_value", "pucci_sampling",
]
