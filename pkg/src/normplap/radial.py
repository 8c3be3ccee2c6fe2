"""Closed-form radial solutions of -Δ_p^N u = 1 in a ball, u = 0 on its boundary.

    u_R(x) = c_p (R^2 - |x - x̄|^2) / 2,     -du_R/dnu = c_p R.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import Jet, PValue, as_p, c_p, eval_lower, eval_normalized, eval_upper

__all__ = [
    "RadialSolution",
    "radial_value",
    "radial_jet",
    "radial_neumann",
    "verify_radial_is_solution",
    "RadialReport",
]


@dataclass(frozen=True)
class RadialSolution:
    p: PValue
    n: int
    R: float
    center: tuple = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "p", as_p(self.p))
        if self.n < 2:
            raise ValueError("dimension must be >= 2")
        if not self.R > 0:
            raise ValueError("radius must be positive")
        c = (0.0,) * self.n if self.center is None else tuple(float(v) for v in self.center)
        if len(c) != self.n:
            raise ValueError(f"center has {len(c)} coordinates, expected {self.n}")
        object.__setattr__(self, "center", c)

    @property
    def cp(self) -> float:
        return c_p(self.p, self.n)


def radial_value(s: RadialSolution, x):
    """Value of u_R at ``x``; accepts a point or an (..., n) array of points."""
    d = np.asarray(x, dtype=float) - np.asarray(s.center)
    r2 = np.sum(d * d, axis=-1)
    return 0.5 * s.cp * (s.R**2 - r2)


def radial_jet(s: RadialSolution, x) -> Jet:
    d = np.asarray(x, dtype=float) - np.asarray(s.center)
    return Jet(-s.cp * d, -s.cp * np.eye(s.n))


def radial_neumann(p, n: int, R: float) -> float:
    if R <= 0:
        raise ValueError("radius must be positive")
    return c_p(p, n) * R


@dataclass
class RadialReport:
    p: str
    n: int
    samples: int
    worst_deviation: float
    center_upper: float
    center_lower: float
    passed: bool


def verify_radial_is_solution(s: RadialSolution, samples: int = 1000, seed: int = 0, tol: float = 1e-10) -> RadialReport:
    """Check -Δ_p^N u_R = 1 at random points of the ball and at its center."""
    if samples < 100:
        raise ValueError("need at least 100 samples")
    rng = np.random.default_rng(seed)
    # uniform in the ball, away from the center
    dirs = rng.normal(size=(samples, s.n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    rad = s.R * rng.uniform(1e-3, 1.0, size=samples) ** (1.0 / s.n)
    pts = np.asarray(s.center) + dirs * rad[:, None]
    worst = 0.0
    for x in pts:
        worst = max(worst, abs(eval_normalized(s.p, radial_jet(s, x)) + 1.0))
    jc = radial_jet(s, s.center)
    up, lo = eval_upper(s.p, jc), eval_lower(s.p, jc)
    worst = max(worst, abs(up + 1.0), abs(lo + 1.0))
    return RadialReport(str(s.p), s.n, samples, worst, up, lo, worst < tol)
