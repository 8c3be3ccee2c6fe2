"""Monotone grid solver for the normalized p-Laplacian Dirichlet problem."""
from .dirichlet import (
    REGULARIZATION,
    SolveReport,
    UnsupportedExponentError,
    boundary_normal_derivative,
    discrete_operator,
    discrete_operator_field,
    existence_guard,
    solve_dirichlet,
)
from .grid import BOUNDARY_ADJACENT, EXTERIOR, INTERIOR, GridField, InsufficientResolutionError, make_grid, sample_field
from .scheme import apply_operator, linearize, split_weights

__all__ = [
    "REGULARIZATION", "SolveReport", "UnsupportedExponentError", "boundary_normal_derivative",
    "discrete_operator", "discrete_operator_field", "existence_guard", "solve_dirichlet",
    "BOUNDARY_ADJACENT", "EXTERIOR", "INTERIOR", "GridField", "InsufficientResolutionError",
    "make_grid", "sample_field", "apply_operator", "linearize", "split_weights",
]
