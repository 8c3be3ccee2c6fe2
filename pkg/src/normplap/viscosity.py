"""Sample-based checks of the viscosity inequalities for closed-form candidates.

For a C² candidate the test functions touching it at a point may be replaced
by the candidate itself, so the sub/supersolution inequalities reduce to

    sub:    -Δ_p^+ u(x) <= f(x)
    super:  -Δ_p^- u(x) >= f(x)

evaluated on the candidate's own jet.  Non-C² candidates are out of scope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .geometry import Domain, boundary_sample, radii, touching_points
from .operators import Jet, PLike, as_p, c_p, eval_lower, eval_upper
from .profiles import ProfileDomainError, QProfile
from .radial import RadialSolution, radial_jet, radial_value

__all__ = [
    "Candidate",
    "NBall",
    "JetMismatchError",
    "InteriorReport",
    "NeumannReport",
    "DegenerateReport",
    "radial_candidate",
    "constant_candidate",
    "linear_candidate",
    "spot_check_jet",
    "sample_points",
    "check_interior",
    "check_neumann",
    "check_degenerate_relation",
]

TOL = 1e-9
DEGENERATE_TOL = 1e-6
FD_STEP = 1e-5
FD_RTOL = 1e-4


class JetMismatchError(ValueError):
    """The supplied jet is not the derivative of the supplied value function."""


@dataclass(frozen=True)
class NBall:
    """Ball in R^n, used for candidates in dimension n > 2."""

    R: float
    n: int
    center: tuple = None

    def __post_init__(self):
        c = (0.0,) * self.n if self.center is None else tuple(float(v) for v in self.center)
        object.__setattr__(self, "center", c)

    @property
    def xbar(self):
        return self.center


@dataclass(frozen=True)
class Candidate:
    """A closed-form function with its exact jet.

    ``value(x)`` and ``jet(x)`` take a point of R^n.  ``region(x)`` says where
    the candidate is C² (everywhere when omitted).
    """

    value: Callable
    jet: Callable
    dim: int = 2
    region: Optional[Callable] = None
    name: str = "candidate"

    def smooth_at(self, x) -> bool:
        return True if self.region is None else bool(self.region(np.asarray(x, dtype=float)))

    def negated(self) -> "Candidate":
        v, j = self.value, self.jet
        return Candidate(lambda x: -v(x), lambda x: j(x).scaled(-1.0), self.dim, self.region, f"-({self.name})")


def _fd_jet(value: Callable, jet: Callable, x: np.ndarray, step: float):
    n = x.size
    g = np.empty(n)
    H = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        g[i] = (value(x + e) - value(x - e)) / (2 * step)
        H[i] = (jet(x + e).gradient - jet(x - e).gradient) / (2 * step)
    return g, H


def spot_check_jet(c: Candidate, points, step: float = FD_STEP, rtol: float = FD_RTOL) -> float:
    """Largest relative finite-difference mismatch of the jet; raises past ``rtol``.

    The gradient is compared with central differences of the value, the
    Hessian with central differences of the gradient.
    """
    worst = 0.0
    for x in np.atleast_2d(np.asarray(points, dtype=float)):
        j = c.jet(x)
        g, H = _fd_jet(c.value, c.jet, x, step)
        scale = max(1.0, float(np.max(np.abs(j.gradient))), float(np.max(np.abs(j.hessian))))
        err = max(float(np.max(np.abs(g - j.gradient))), float(np.max(np.abs(H - j.hessian)))) / scale
        worst = max(worst, err)
        if err > rtol:
            raise JetMismatchError(f"jet of {c.name} disagrees with finite differences at {x.tolist()}: {err:.3e}")
    return worst


def radial_candidate(p: PLike, n: int = 2, R: float = 1.0, center=None) -> Candidate:
    s = RadialSolution(as_p(p), n, R, center)
    xb = np.asarray(s.center)
    return Candidate(
        lambda x: float(radial_value(s, x)),
        lambda x: radial_jet(s, x),
        n,
        lambda x: float(np.linalg.norm(x - xb)) <= R * (1 + 1e-12),
        f"u_R(p={s.p}, n={n}, R={R})",
    )


def constant_candidate(value: float = 0.0, n: int = 2) -> Candidate:
    return Candidate(lambda x: float(value), lambda x: Jet(np.zeros(n), np.zeros((n, n))), n, None, f"const {value}")


def linear_candidate(a, b: float = 0.0) -> Candidate:
    """u(x) = b + <a, x>."""
    a = np.asarray(a, dtype=float)
    n = a.size
    return Candidate(lambda x: float(b + a @ x), lambda x: Jet(a, np.zeros((n, n))), n, None, f"linear {a.tolist()}, {b}")


def sample_points(d, count: int = 1000, seed: int = 0, include_touching: bool = True) -> np.ndarray:
    """Scrambled Halton points inside ``d`` (a 2-D Domain or an NBall), plus x̄ and touching points."""
    if isinstance(d, NBall):
        n = d.n
        eng = qmc.Halton(d=n + 1, scramble=True, seed=seed)
        u = eng.random(count)
        dirs = _sphere_dirs(u[:, :n])
        rad = d.R * u[:, n] ** (1.0 / n) * (1 - 1e-9)
        return np.vstack([np.asarray(d.center)[None, :], np.asarray(d.center) + dirs * rad[:, None]])
    x0, x1, y0, y1 = d.bbox
    eng = qmc.Halton(d=2, scramble=True, seed=seed)
    out = []
    while sum(len(o) for o in out) < count:
        P = qmc.scale(eng.random(2 * count), [x0, y0], [x1, y1])
        out.append(P[d.contains(P[:, 0], P[:, 1])])
    pts = np.vstack(out)[:count]
    extra = [np.asarray(d.xbar, dtype=float)]
    if include_touching:
        # just inside the touching points, where the barrier comparison is tight
        R1, _ = radii(d)
        for P in touching_points(d):
            extra.append(P.location - 1e-6 * R1 * P.outer_normal)
    return np.vstack([np.array(extra), pts])


def _sphere_dirs(u: np.ndarray) -> np.ndarray:
    from scipy.stats import norm

    z = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _fvalue(f, x) -> float:
    return float(f(x)) if callable(f) else float(f)


@dataclass
class InteriorReport:
    mode: str
    p: str
    checked: int
    violations: list = field(default_factory=list)
    worst_residual: float = -math.inf

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json_dict(self) -> dict:
        return {"mode": self.mode, "violations": self.violations, "worst_residual": self.worst_residual}


def check_interior(c: Candidate, p: PLike, f, points, mode: str = "solution", tol: float = TOL) -> InteriorReport:
    """Check the sub/super inequalities on the candidate's jet at each point.

    The residual is -Δ_p^+ u - f (sub) or f + Δ_p^- u (super); a point is in
    violation when its residual exceeds ``tol``.
    """
    if mode not in ("sub", "super", "solution"):
        raise ValueError(f"mode must be sub, super or solution, got {mode!r}")
    p = as_p(p)
    rep = InteriorReport(mode, str(p), 0)
    for x in np.atleast_2d(np.asarray(points, dtype=float)):
        if not c.smooth_at(x):
            raise ValueError(f"point {x.tolist()} is outside the candidate's smoothness region")
        j = c.jet(x)
        fx = _fvalue(f, x)
        checks = []
        if mode in ("sub", "solution"):
            checks.append(("sub", -eval_upper(p, j) - fx))
        if mode in ("super", "solution"):
            checks.append(("super", fx + eval_lower(p, j)))
        for kind, res in checks:
            rep.worst_residual = max(rep.worst_residual, res)
            if res > tol:
                rep.violations.append({"point": x.tolist(), "kind": kind, "residual": res})
        rep.checked += 1
    return rep


@dataclass
class NeumannReport:
    points: int
    max_abs_residual: float
    residuals: list
    barrier: dict
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json_dict(self) -> dict:
        return {
            "mode": "neumann",
            "violations": self.violations,
            "worst_residual": self.max_abs_residual,
            "barrier": self.barrier,
        }


def check_neumann(c: Candidate, d: Domain, q: QProfile, p: PLike, n: int = 2, samples: int = 256, tol: float = TOL) -> NeumannReport:
    """Signed residual -<∇u, ν> - q(|x - x̄|) on ∂Ω, and the radial barrier test.

    The barrier test checks -∂u1/∂ν(P1) <= q(R1) and q(R2) <= -∂u2/∂ν(P2),
    u1, u2 the radial solutions on B(x̄, R1), B(x̄, R2) and P1, P2 the points
    where those balls touch ∂Ω.
    """
    p = as_p(p)
    xb = np.asarray(d.xbar)
    res = []
    viol = []
    for bp in boundary_sample(d, samples):
        x = np.asarray(bp.location, dtype=float)
        r = float(np.linalg.norm(x - xb))
        try:
            qv = float(q(r))
        except ProfileDomainError as e:
            raise ProfileDomainError(f"q undefined at sampled radius r={r!r}: {e}") from None
        slope = -float(c.jet(x).gradient @ bp.outer_normal)
        rr = slope - qv
        res.append({"point": x.tolist(), "r": r, "slope": slope, "q": qv, "residual": rr})
        if abs(rr) > tol:
            viol.append({"point": x.tolist(), "kind": "neumann", "residual": rr})
    R1, R2 = radii(d)
    P1, P2 = touching_points(d)
    b1 = RadialSolution(p, n, R1, tuple(xb))
    b2 = RadialSolution(p, n, R2, tuple(xb))
    s1 = -float(radial_jet(b1, P1.location).gradient @ P1.outer_normal)
    s2 = -float(radial_jet(b2, P2.location).gradient @ P2.outer_normal)
    q1, q2 = float(q(R1)), float(q(R2))
    barrier = {
        "R1": R1,
        "R2": R2,
        "inner_slope_P1": s1,
        "q_R1": q1,
        "inner_holds": s1 <= q1 + tol,
        "outer_slope_P2": s2,
        "q_R2": q2,
        "outer_holds": q2 <= s2 + tol,
    }
    if not barrier["inner_holds"]:
        viol.append({"point": P1.location.tolist(), "kind": "barrier_inner", "residual": s1 - q1})
    if not barrier["outer_holds"]:
        viol.append({"point": P2.location.tolist(), "kind": "barrier_outer", "residual": q2 - s2})
    worst = max((abs(e["residual"]) for e in res), default=0.0)
    return NeumannReport(len(res), worst, res, barrier, viol)


@dataclass
class DegenerateReport:
    checked: int
    worst_residual: float
    min_boundary_curvature: float
    violations: list = field(default_factory=list)
    precondition_violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations and not self.precondition_violations

    def to_json_dict(self) -> dict:
        return {
            "mode": "degenerate",
            "violations": self.violations + self.precondition_violations,
            "worst_residual": self.worst_residual,
            "min_boundary_curvature": self.min_boundary_curvature,
        }


def level_mean_curvature(j: Jet) -> float:
    """Mean curvature of the level set through a point, positive for level
    spheres around a maximum: H = -div(∇u/|∇u|)/(n-1)."""
    g, Hs = j.gradient, j.hessian
    gn = float(np.linalg.norm(g))
    n = g.size
    div = (float(np.trace(Hs)) - float(g @ Hs @ g) / gn**2) / gn
    return -div / (n - 1)


def _band_points(d, band: float, samples: int, layers: int):
    """(points, is_boundary) in the band of width ``band`` inside ∂Ω."""
    if isinstance(d, NBall):
        dirs = _sphere_dirs(qmc.Halton(d=d.n, scramble=True, seed=0).random(samples))
        base = [(np.asarray(d.center) + d.R * v, v) for v in dirs]
    else:
        base = [(np.asarray(bp.location, float), np.asarray(bp.outer_normal, float)) for bp in boundary_sample(d, samples)]
    out = []
    for s in np.linspace(0.0, band, layers):
        for x, nu in base:
            out.append((x - s * nu, s == 0.0))
    return out


def check_degenerate_relation(c: Candidate, d, band: float, samples: int = 128, layers: int = 5, tol: float = DEGENERATE_TOL) -> DegenerateReport:
    """(n-1)|∇u| H = 1 in a boundary band, H the mean curvature of the level set.

    On ∂Ω itself H must also be positive.
    """
    n = c.dim
    rep = DegenerateReport(0, 0.0, math.inf)
    for x, on_boundary in _band_points(d, band, samples, layers):
        j = c.jet(x)
        gn = float(np.linalg.norm(j.gradient))
        if gn < 1e-12 * max(1.0, float(np.max(np.abs(j.hessian)))):
            rep.precondition_violations.append({"point": x.tolist(), "kind": "vanishing_gradient", "residual": math.nan})
            continue
        H = level_mean_curvature(j)
        res = (n - 1) * gn * H - 1.0
        rep.checked += 1
        rep.worst_residual = max(rep.worst_residual, abs(res))
        if abs(res) > tol:
            rep.violations.append({"point": x.tolist(), "kind": "relation", "residual": res, "H": H})
        if on_boundary:
            rep.min_boundary_curvature = min(rep.min_boundary_curvature, H)
            if not H > 0.0:
                rep.violations.append({"point": x.tolist(), "kind": "nonpositive_curvature", "residual": -H, "H": H})
    return rep
