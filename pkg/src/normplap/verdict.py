"""Verdicts for the overdetermined problem

    -Δ_p^N u = 1 in Ω,   u = 0 and -∂u/∂ν = q on ∂Ω,

from a Neumann profile q and the radii R1 <= R2 of ∂Ω around x̄.

Radial clauses (q = q(r)), with φ(r) = q(r) - c_p r on [R1, R2]:

1. φ has exactly one root R and φ(r)(r - R) > 0 elsewhere: a solution can
   exist only on the ball B(x̄, R); any other domain has none.
2. q(r)/r strictly increasing: a solution forces Ω = B(x̄, R1).
3. q continuous and φ without roots: no solution.

Curvature clause (q = q(r, h), h the boundary mean curvature): if q is
positive, non-decreasing in h and q(r, 1/r)/r strictly increasing, a
solution smooth near the boundary forces R1 = R2.

Strict monotonicity is certified on a mesh with a positive margin; anything
weaker is Inconclusive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .geometry import BoundaryPoint, Domain, radii, touching_points
from .operators import PLike, as_p, c_p
from .profiles import ProfileDomainError, ProfileError, QProfile

__all__ = [
    "Root",
    "RootReport",
    "Verdict",
    "HypothesisViolationError",
    "SymmetryFailure",
    "find_roots",
    "decide_theorem1",
    "decide_theorem2",
    "check_necessary_inequalities",
    "build_symmetric_q",
    "SymmetricQ",
    "InequalityReport",
]

MESH_POINTS = 10_000
ROOT_XTOL = 1e-12
STRICT_MARGIN = 1e-12
BALL_RTOL = 1e-9
# relative width of the neighbourhood probed when R1 = R2 leaves no interval
BALL_PROBE = 1e-3


class HypothesisViolationError(ValueError):
    pass


class SymmetryFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class Root:
    r: float
    pattern: tuple[str, str]


@dataclass
class RootReport:
    roots: list[Root]
    degenerate: bool = False
    note: str = ""

    def to_json_dict(self) -> dict:
        return {
            "roots": [{"r": x.r, "pattern": "".join(x.pattern)} for x in self.roots],
            "degenerate": self.degenerate,
            "note": self.note,
        }


@dataclass
class Verdict:
    outcome: str
    clause: list[str] = field(default_factory=list)
    radius: Optional[float] = None
    evidence: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {"outcome": self.outcome, "clause": list(self.clause), "radius": self.radius, "evidence": self.evidence}


def _sign(v: float, tol: float) -> str:
    if v > tol:
        return "+"
    if v < -tol:
        return "-"
    return "0"


def _mesh(R1: float, R2: float, n: int = MESH_POINTS) -> np.ndarray:
    if R2 - R1 <= BALL_RTOL * R2:
        return np.array([R1])
    return np.linspace(R1, R2, n + 1)


def _eval(q: QProfile, r: np.ndarray) -> np.ndarray:
    v = np.asarray(q(r), dtype=float) * np.ones_like(r)
    if not np.all(np.isfinite(v)):
        raise ProfileError("q has non-finite values on the mesh")
    return v


def _zero_tol(cp: float, r) -> np.ndarray:
    return 1e-12 * np.maximum(1.0, cp * np.abs(r))


def find_roots(q: QProfile, p: PLike, n: int, R1: float, R2: float) -> RootReport:
    """Roots of φ(r) = q(r) - c_p r on [R1, R2] with the sign of φ around each."""
    if R1 > R2:
        raise ValueError("need R1 <= R2")
    if q.is_curvature:
        raise ProfileError("find_roots needs a radial profile q(r)")
    cp = c_p(p, n)
    r = _mesh(R1, R2)
    phi = _eval(q, r) - cp * r
    tol = _zero_tol(cp, r)
    zero = np.abs(phi) <= tol
    if r.size > 1 and np.all(zero):
        return RootReport([], True, "degenerate: identically zero")

    def phi_at(x):
        return float(q(x)) - cp * x

    roots: list[Root] = []
    if r.size == 1:
        if zero[0]:
            R = float(r[0])
            pat = ("?", "?")
            try:
                d = BALL_PROBE * R
                pat = (_sign(phi_at(R - d), 0.0), _sign(phi_at(R + d), 0.0))
            except ProfileDomainError:
                pass
            roots.append(Root(R, pat))
        return RootReport(roots)
    s = np.where(zero, 0, np.sign(phi)).astype(int)
    i = 0
    N = r.size
    while i < N:
        if s[i] == 0:
            # run of mesh zeros: one root at its midpoint
            j = i
            while j + 1 < N and s[j + 1] == 0:
                j += 1
            before = "-" if i == 0 or s[i - 1] < 0 else "+"
            after = "-" if j == N - 1 or s[j + 1] < 0 else "+"
            if i == 0:
                before = "0"
            if j == N - 1:
                after = "0"
            roots.append(Root(float(0.5 * (r[i] + r[j])), (before, after)))
            i = j + 1
            continue
        if i + 1 < N and s[i + 1] != 0 and s[i + 1] != s[i]:
            x = optimize.brentq(phi_at, r[i], r[i + 1], xtol=ROOT_XTOL)
            roots.append(Root(float(x), ("-", "+") if s[i] < 0 else ("+", "-")))
        i += 1
    return RootReport(roots)


def _strictly_increasing(values: np.ndarray) -> tuple[bool, float]:
    if values.size < 2:
        return False, math.nan
    d = np.diff(values)
    m = float(np.min(d))
    return m >= STRICT_MARGIN, m


def _ratio_mesh(q: QProfile, R1: float, R2: float, curvature: bool):
    """Mesh and q(r)/r (or q(r, 1/r)/r) on it, probing a neighbourhood if R1 = R2."""
    r = _mesh(R1, R2)
    if r.size == 1:
        R = float(r[0])
        r = np.linspace(R * (1 - BALL_PROBE), R * (1 + BALL_PROBE), 101)
    vals = q(r, 1.0 / r) if curvature else q(r)
    vals = np.asarray(vals, dtype=float) * np.ones_like(r)
    if not np.all(np.isfinite(vals)):
        raise ProfileError("q has non-finite values on the mesh")
    return r, vals / r


def decide_theorem1(q: QProfile, p: PLike, n: int, d: Domain) -> Verdict:
    """Apply the three radial clauses; all that fire are listed, the first decides."""
    p = as_p(p)
    cp = c_p(p, n)
    R1, R2 = radii(d)
    is_ball = R2 - R1 < BALL_RTOL * R2
    rr = find_roots(q, p, n, R1, R2)
    r = _mesh(R1, R2)
    phi = _eval(q, r) - cp * r
    evidence = {
        "R1": R1,
        "R2": R2,
        "c_p": cp,
        "domain_is_ball": is_ball,
        "roots": rr.to_json_dict(),
        "phi_R1": float(phi[0]),
        "phi_R2": float(phi[-1]),
    }
    fired: list[tuple[str, str, Optional[float]]] = []

    if not rr.degenerate and len(rr.roots) == 1:
        R = rr.roots[0].r
        off = np.abs(r - R) > 1e-9 * max(R, 1.0)
        ok = bool(np.all(phi[off] * (r[off] - R) > 0.0))
        if r.size == 1:
            ok = rr.roots[0].pattern in (("-", "+"), ("?", "?"))
        evidence["clause1_sign_condition"] = ok
        if ok:
            fired.append(("1", "OnlyBall" if is_ball else "NoSolution", R))

    try:
        rm, ratio = _ratio_mesh(q, R1, R2, curvature=False)
        inc, margin = _strictly_increasing(ratio)
    except ProfileDomainError:
        inc, margin = False, math.nan
    evidence["ratio_min_increment"] = margin
    if inc:
        fired.append(("2", "MustBeBallCenteredAtXbar", None))

    if q.continuous and not rr.degenerate and not rr.roots:
        fired.append(("3", "NoSolution", None))

    if not fired:
        return Verdict("Inconclusive", [], None, evidence)
    outcome, radius = fired[0][1], fired[0][2]
    if radius is None:
        radius = next((x[2] for x in fired if x[2] is not None), None)
    if outcome == "NoSolution" and fired[0][0] == "1":
        evidence["note"] = f"only the ball B(x̄, {radius!r}) admits a solution; this domain is not that ball"
    return Verdict(outcome, [x[0] for x in fired], radius, evidence)


def decide_theorem2(q: QProfile, n: int, d: Domain, h_points: int = 41) -> Verdict:
    """Curvature clause for q(r, h)."""
    if not q.is_curvature:
        raise ProfileError("decide_theorem2 needs a curvature profile q(r, h)")
    R1, R2 = radii(d)
    r = _mesh(R1, R2, 200)
    if r.size == 1:
        r = np.linspace(R1 * (1 - BALL_PROBE), R1 * (1 + BALL_PROBE), 21)
    # curvatures a C² boundary in [R1, R2] can meet, padded on both sides
    hs = np.geomspace(0.25 / max(R2, 1e-12), 4.0 / max(R1, 1e-12), h_points)
    Rg, Hg = np.meshgrid(r, hs, indexing="ij")
    vals = np.asarray(q(Rg, Hg), dtype=float) * np.ones_like(Rg)
    if not np.all(np.isfinite(vals)):
        raise ProfileError("q(r, h) is not finite on the mesh")
    if np.any(vals <= 0.0):
        i = np.unravel_index(int(np.argmin(vals)), vals.shape)
        raise HypothesisViolationError(f"q must be positive; q({Rg[i]!r}, {Hg[i]!r}) = {vals[i]!r}")
    dh = np.diff(vals, axis=1)
    monotone_h = bool(np.all(dh >= -1e-12 * np.maximum(1.0, np.abs(vals[:, 1:]))))
    if q.monotone_in_h is False:
        monotone_h = False
    _, ratio = _ratio_mesh(q, R1, R2, curvature=True)
    inc, margin = _strictly_increasing(ratio)
    evidence = {
        "R1": R1,
        "R2": R2,
        "monotone_in_h": monotone_h,
        "ratio_min_increment": margin,
        "h_range": [float(hs[0]), float(hs[-1])],
    }
    if monotone_h and inc:
        return Verdict("MustBeBallCenteredAtXbar", ["curvature"], None, evidence)
    return Verdict("Inconclusive", [], None, evidence)


@dataclass
class InequalityReport:
    R1: float
    R2: float
    q_R1: float
    q_R2: float
    c_p: float
    lower_holds: bool
    upper_holds: bool
    neumann_P1: Optional[float]
    neumann_P2: Optional[float]
    flagged: bool
    message: str

    @property
    def passed(self) -> bool:
        return not self.flagged

    def to_json_dict(self) -> dict:
        return {
            "R1": self.R1,
            "R2": self.R2,
            "q_R1": self.q_R1,
            "q_R2": self.q_R2,
            "c_p": self.c_p,
            "q_R1_minus_cp_R1": self.q_R1 - self.c_p * self.R1,
            "q_R2_minus_cp_R2": self.q_R2 - self.c_p * self.R2,
            "lower_holds": self.lower_holds,
            "upper_holds": self.upper_holds,
            "neumann_P1": self.neumann_P1,
            "neumann_P2": self.neumann_P2,
            "flagged": self.flagged,
            "message": self.message,
        }


def check_necessary_inequalities(fld, q: QProfile, p: PLike, n: int, d: Domain, tol: float = 1e-9) -> InequalityReport:
    """q(R1) >= c_p R1 and q(R2) <= c_p R2, plus the solved field's slopes at P1, P2.

    The two inequalities come from comparing u with the radial solutions on
    the inscribed and circumscribed balls, which touch ∂Ω at P1 and P2.
    """
    from .solver import boundary_normal_derivative

    cp = c_p(p, n)
    R1, R2 = radii(d)
    P1, P2 = touching_points(d)
    q1, q2 = float(q(R1)), float(q(R2))
    scale = max(1.0, cp * R2)
    lower = q1 - cp * R1 >= -tol * scale
    upper = q2 - cp * R2 <= tol * scale
    n1 = n2 = None
    if fld is not None:
        n1 = boundary_normal_derivative(fld, P1)
        n2 = boundary_normal_derivative(fld, P2)
    flagged = not (lower and upper)
    msg = "necessary inequalities hold"
    if flagged:
        msg = "no viscosity solution can satisfy the Neumann datum"
    return InequalityReport(R1, R2, q1, q2, cp, lower, upper, n1, n2, flagged, msg)


@dataclass
class SymmetricQ:
    profile: QProfile
    r: np.ndarray
    q: np.ndarray
    spread: np.ndarray
    tolerance: float

    def csv_rows(self):
        return [(float(a), float(b), float(c)) for a, b, c in zip(self.r, self.q, self.spread)]


def build_symmetric_q(fld, d: Domain, samples: int = 65, expected_error: Optional[float] = None) -> SymmetricQ:
    """q(r) = |∇u| on the boundary of a centred, axis-aligned ellipse.

    Each radius r in [a, b] is met by up to four boundary points, mirror images
    of one another; q is their mean slope and the spread their max - min.
    """
    from .solver import boundary_normal_derivative

    if d.kind not in ("ellipse", "ball") or tuple(d.center) != tuple(d.xbar):
        raise ValueError("build_symmetric_q needs an ellipse centred at x̄")
    a, b = d.semi_axes
    cx, cy = d.center
    tol = 10.0 * (expected_error if expected_error is not None else fld.h)

    def slope(t_x, t_y):
        x, y = a * t_x, b * t_y
        nu = np.array([x / a**2, y / b**2])
        nu /= np.linalg.norm(nu)
        return boundary_normal_derivative(fld, BoundaryPoint(np.array([cx + x, cy + y]), nu, 0.0, 0.0))

    if b - a <= BALL_RTOL * b:
        ts = np.linspace(0.0, 2.0 * math.pi, 4 * samples, endpoint=False)
        vals = np.array([slope(math.cos(t), math.sin(t)) for t in ts])
        r = np.array([a])
        qv = np.array([vals.mean()])
        sp = np.array([vals.max() - vals.min()])
    else:
        r = np.linspace(a, b, samples)
        st = np.sqrt(np.clip((r**2 - a**2) / (b**2 - a**2), 0.0, 1.0))
        ct = np.sqrt(1.0 - st**2)
        qv = np.empty(samples)
        sp = np.empty(samples)
        for k in range(samples):
            pts = {(sx * ct[k], sy * st[k]) for sx in (1.0, -1.0) for sy in (1.0, -1.0)}
            vals = np.array([slope(*pt) for pt in sorted(pts)])
            qv[k] = vals.mean()
            sp[k] = vals.max() - vals.min()
    worst = float(sp.max())
    if worst > tol:
        raise SymmetryFailure(f"reflection spread {worst:.3e} exceeds {tol:.3e}; the solver broke the symmetry")
    return SymmetricQ(QProfile.from_table(r, qv, (a, b), label="symmetric"), r, qv, sp, tol)
