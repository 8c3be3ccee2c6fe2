"""Normalized p-Laplacian: operators, radial solutions, a monotone grid solver
and verdicts for the overdetermined Dirichlet-Neumann problem."""
from .geometry import ball, ellipse, implicit, radii, touching_points
from .operators import Jet, PValue, c_p, eval_classical, eval_lower, eval_normalized, eval_upper
from .profiles import QProfile, parse_expression
from .radial import RadialSolution, radial_jet, radial_neumann, radial_value, verify_radial_is_solution

__version__ = "0.1.0"

__all__ = [
    "ball", "ellipse", "implicit", "radii", "touching_points",
    "Jet", "PValue", "c_p", "eval_classical", "eval_lower", "eval_normalized", "eval_upper",
    "QProfile", "parse_expression",
    "RadialSolution", "radial_jet", "radial_neumann", "radial_value", "verify_radial_is_solution",
]
