"""Planar domains with a distinguished interior point x̄.

Three kinds are supported: a disc, an axis-aligned ellipse and an implicit
domain {phi < 0} given by a callable level-set function.  Boundary points
carry the outer unit normal and the curvature of the boundary curve, with
the convention that a circle of radius R has curvature +1/R.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

__all__ = [
    "Domain",
    "BoundaryPoint",
    "DomainError",
    "DegenerateBoundaryError",
    "GeometryInconsistencyError",
    "ball",
    "ellipse",
    "implicit",
    "radii",
    "sampled_radii",
    "boundary_sample",
    "touching_points",
    "ellipse_curvature",
    "boundary_csv_rows",
]

MIN_RADII_SAMPLES = 4096
NORMAL_ANGLE_TOL = 1e-6
# |∇φ| on the boundary below this fraction of its typical size counts as vanishing
DEGENERATE_GRADIENT = 1e-6


class DomainError(ValueError):
    pass


class DegenerateBoundaryError(DomainError):
    pass


class GeometryInconsistencyError(DomainError):
    pass


@dataclass(frozen=True)
class BoundaryPoint:
    location: np.ndarray
    outer_normal: np.ndarray
    curvature: float
    arc_parameter: float


@dataclass(frozen=True)
class Domain:
    """Immutable 2-D domain.  Build with :func:`ball`, :func:`ellipse` or :func:`implicit`."""

    kind: str
    center: tuple[float, float]
    xbar: tuple[float, float]
    a: float = 0.0
    b: float = 0.0
    phi: Optional[Callable] = field(default=None, compare=False)
    bbox: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def level(self, x, y):
        """Level-set value, negative inside."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        cx, cy = self.center
        if self.kind == "ball":
            return np.hypot(x - cx, y - cy) - self.a
        if self.kind == "ellipse":
            return ((x - cx) / self.a) ** 2 + ((y - cy) / self.b) ** 2 - 1.0
        return np.asarray(self.phi(x, y), dtype=float)

    def contains(self, x, y):
        return self.level(x, y) < 0.0

    @property
    def is_parametric(self) -> bool:
        return self.kind in ("ball", "ellipse")

    @property
    def semi_axes(self) -> tuple[float, float]:
        return (self.a, self.a) if self.kind == "ball" else (self.a, self.b)

    def level_gradient(self, x: float, y: float) -> np.ndarray:
        d = self._fd_step()
        gx = (self.level(x + d, y) - self.level(x - d, y)) / (2 * d)
        gy = (self.level(x, y + d) - self.level(x, y - d)) / (2 * d)
        return np.array([float(gx), float(gy)])

    def _gradient_scale(self) -> float:
        """Typical |∇φ|: the spread of φ on the bounding-box frame over the box diameter."""
        x0, x1, y0, y1 = self.bbox
        s = np.linspace(0.0, 1.0, 33)
        frame = np.concatenate([
            self.level(x0 + s * (x1 - x0), np.full_like(s, y0)),
            self.level(np.full_like(s, x0), y0 + s * (y1 - y0)),
        ])
        return float(np.max(np.abs(frame))) / math.hypot(x1 - x0, y1 - y0)

    def _fd_step(self) -> float:
        x0, x1, y0, y1 = self.bbox
        return 1e-5 * max(x1 - x0, y1 - y0)


def _check_xbar(d: Domain) -> Domain:
    if not float(d.level(*d.xbar)) < 0.0:
        raise DomainError(f"x̄ = {d.xbar} is not strictly inside the domain")
    return d


def ball(radius: float, center=(0.0, 0.0), xbar=None) -> Domain:
    if radius <= 0:
        raise DomainError("ball radius must be positive")
    c = (float(center[0]), float(center[1]))
    xb = c if xbar is None else (float(xbar[0]), float(xbar[1]))
    bb = (c[0] - radius, c[0] + radius, c[1] - radius, c[1] + radius)
    return _check_xbar(Domain("ball", c, xb, a=float(radius), b=float(radius), bbox=bb))


def ellipse(a: float, b: float, center=(0.0, 0.0), xbar=None) -> Domain:
    """Axis-aligned ellipse with semi-axis ``a`` along x and ``b`` along y, a <= b."""
    if not 0 < a <= b:
        raise DomainError(f"ellipse needs 0 < a <= b, got a={a}, b={b}")
    c = (float(center[0]), float(center[1]))
    xb = c if xbar is None else (float(xbar[0]), float(xbar[1]))
    bb = (c[0] - a, c[0] + a, c[1] - b, c[1] + b)
    return _check_xbar(Domain("ellipse", c, xb, a=float(a), b=float(b), bbox=bb))


def implicit(phi: Callable, bbox, xbar) -> Domain:
    """Domain {phi < 0} inside ``bbox = (xmin, xmax, ymin, ymax)``.

    ``phi`` must be vectorized over numpy arrays, C^2 near its zero set and
    positive on the bounding box frame.
    """
    bb = tuple(float(v) for v in bbox)
    if not (bb[0] < bb[1] and bb[2] < bb[3]):
        raise DomainError(f"invalid bounding box {bbox}")
    xb = (float(xbar[0]), float(xbar[1]))
    d = Domain("implicit", xb, xb, phi=phi, bbox=bb)
    _check_xbar(d)
    s = np.linspace(0.0, 1.0, 65)
    frame = np.concatenate([
        d.level(bb[0] + s * (bb[1] - bb[0]), np.full_like(s, bb[2])),
        d.level(bb[0] + s * (bb[1] - bb[0]), np.full_like(s, bb[3])),
        d.level(np.full_like(s, bb[0]), bb[2] + s * (bb[3] - bb[2])),
        d.level(np.full_like(s, bb[1]), bb[2] + s * (bb[3] - bb[2])),
    ])
    if not np.all(frame > 0):
        raise DomainError("implicit level set does not change sign across the bounding box")
    return d


def ellipse_curvature(a: float, b: float, t):
    """Curvature of (a cos t, b sin t)."""
    t = np.asarray(t, dtype=float)
    return a * b / (a * a * np.sin(t) ** 2 + b * b * np.cos(t) ** 2) ** 1.5


def _param_point(d: Domain, t: float) -> BoundaryPoint:
    a, b = d.semi_axes
    cx, cy = d.center
    ct, st = math.cos(t), math.sin(t)
    loc = np.array([cx + a * ct, cy + b * st])
    nrm = np.array([b * ct, a * st])
    nrm /= np.linalg.norm(nrm)
    return BoundaryPoint(loc, nrm, float(ellipse_curvature(a, b, t)), float(t))


def _implicit_point(d: Domain, x: np.ndarray, s: float) -> BoundaryPoint:
    dx = d._fd_step() * 10
    X, Y = float(x[0]), float(x[1])
    f = d.level
    fx = (f(X + dx, Y) - f(X - dx, Y)) / (2 * dx)
    fy = (f(X, Y + dx) - f(X, Y - dx)) / (2 * dx)
    f0 = f(X, Y)
    fxx = (f(X + dx, Y) - 2 * f0 + f(X - dx, Y)) / dx**2
    fyy = (f(X, Y + dx) - 2 * f0 + f(X, Y - dx)) / dx**2
    fxy = (f(X + dx, Y + dx) - f(X + dx, Y - dx) - f(X - dx, Y + dx) + f(X - dx, Y - dx)) / (4 * dx**2)
    gn = math.hypot(float(fx), float(fy))
    if gn < DEGENERATE_GRADIENT * d._gradient_scale():
        raise DegenerateBoundaryError(f"level-set gradient vanishes at boundary point {x}")
    kappa = float(fxx * fy**2 - 2 * fx * fy * fxy + fyy * fx**2) / gn**3
    return BoundaryPoint(np.array([X, Y]), np.array([float(fx), float(fy)]) / gn, kappa, float(s))


def _project(d: Domain, x: np.ndarray, iters: int = 8) -> np.ndarray:
    x = np.array(x, dtype=float)
    for _ in range(iters):
        g = d.level_gradient(*x)
        gg = float(g @ g)
        if gg < 1e-20:
            raise DegenerateBoundaryError(f"level-set gradient vanishes near {x}")
        x = x - float(d.level(*x)) * g / gg
    return x


def _ray_crossing(d: Domain, origin, direction) -> np.ndarray:
    x0, x1, y0, y1 = d.bbox
    smax = 2.0 * math.hypot(x1 - x0, y1 - y0)
    o = np.asarray(origin, dtype=float)
    u = np.asarray(direction, dtype=float)
    try:
        s = optimize.brentq(lambda s: float(d.level(*(o + s * u))), 0.0, smax, xtol=1e-14, maxiter=400)
    except RuntimeError:
        # only a flat (multiple) zero of the level function stalls brentq
        raise DegenerateBoundaryError(f"level function has a degenerate zero along {tuple(u)}") from None
    return o + s * u


def _march(d: Domain) -> tuple[np.ndarray, float]:
    """Trace the zero level set counter-clockwise; returns polyline and its length."""
    x0, x1, y0, y1 = d.bbox
    ds = max(x1 - x0, y1 - y0) / 4000.0
    start = _project(d, _ray_crossing(d, d.xbar, (1.0, 0.0)))
    pts = [start]
    x = start.copy()
    travelled = 0.0
    for _ in range(200000):
        n = d.level_gradient(*x)
        n /= np.linalg.norm(n)
        x = _project(d, x + ds * np.array([-n[1], n[0]]), iters=3)
        travelled += float(np.linalg.norm(x - pts[-1]))
        pts.append(x)
        if travelled > 10 * ds and np.linalg.norm(x - start) < 1.5 * ds:
            break
    else:
        raise DegenerateBoundaryError("boundary marching did not close")
    pts[-1] = start
    P = np.array(pts)
    return P, float(np.sum(np.linalg.norm(np.diff(P, axis=0), axis=1)))


def boundary_sample(d: Domain, m: int) -> list[BoundaryPoint]:
    """``m`` boundary points with normals and curvature.

    Parametric domains use t in [0, 2*pi) uniformly; implicit domains are
    traced and resampled uniformly in arc length (arc_parameter = arc length).
    """
    if m < 16:
        raise ValueError("boundary_sample needs m >= 16")
    if d.is_parametric:
        return [_param_point(d, 2.0 * math.pi * k / m) for k in range(m)]
    P, length = _march(d)
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(P, axis=0), axis=1))])
    targets = np.arange(m) * (s[-1] / m)
    xs = np.interp(targets, s, P[:, 0])
    ys = np.interp(targets, s, P[:, 1])
    return [_implicit_point(d, _project(d, np.array([x, y])), st) for x, y, st in zip(xs, ys, targets)]


def sampled_radii(d: Domain, m: int) -> tuple[float, float]:
    """Min/max distance to x̄ over ``m`` boundary samples, without refinement."""
    xb = np.asarray(d.xbar)
    r = [float(np.linalg.norm(bp.location - xb)) for bp in boundary_sample(d, m)]
    return min(r), max(r)


def _refine_param(d: Domain, t0: float, dt: float) -> float:
    a, b = d.semi_axes
    cx, cy = d.center
    xb = d.xbar

    def dr2(t):
        x, y = cx + a * math.cos(t) - xb[0], cy + b * math.sin(t) - xb[1]
        return x * (-a * math.sin(t)) + y * (b * math.cos(t))

    lo, hi = t0 - dt, t0 + dt
    if dr2(lo) * dr2(hi) > 0:
        return t0
    return optimize.brentq(dr2, lo, hi, xtol=1e-15)


def _refine_implicit(d: Domain, x0: np.ndarray) -> np.ndarray:
    xb = np.asarray(d.xbar)

    def F(x):
        g = d.level_gradient(*x)
        v = x - xb
        return [float(d.level(*x)), g[0] * v[1] - g[1] * v[0]]

    sol = optimize.root(F, x0, tol=1e-14)
    return sol.x if sol.success else x0


def _extremes(d: Domain) -> tuple[BoundaryPoint, BoundaryPoint]:
    xb = np.asarray(d.xbar)
    m = MIN_RADII_SAMPLES
    pts = boundary_sample(d, m)
    r = np.array([np.linalg.norm(bp.location - xb) for bp in pts])
    i1, i2 = int(np.argmin(r)), int(np.argmax(r))
    if d.is_parametric:
        dt = 2.0 * math.pi / m
        p1 = _param_point(d, _refine_param(d, pts[i1].arc_parameter, 1.5 * dt) % (2 * math.pi))
        p2 = _param_point(d, _refine_param(d, pts[i2].arc_parameter, 1.5 * dt) % (2 * math.pi))
        return p1, p2
    p1 = _implicit_point(d, _refine_implicit(d, pts[i1].location), pts[i1].arc_parameter)
    p2 = _implicit_point(d, _refine_implicit(d, pts[i2].location), pts[i2].arc_parameter)
    return p1, p2


def _centered(d: Domain) -> bool:
    return d.is_parametric and d.center == d.xbar


def radii(d: Domain) -> tuple[float, float]:
    """R1 = min and R2 = max of |x - x̄| over the boundary."""
    _check_xbar(d)
    if _centered(d):
        return d.a, d.b
    if d.kind == "ball":
        off = math.dist(d.center, d.xbar)
        return d.a - off, d.a + off
    p1, p2 = _extremes(d)
    xb = np.asarray(d.xbar)
    return float(np.linalg.norm(p1.location - xb)), float(np.linalg.norm(p2.location - xb))


def touching_points(d: Domain) -> tuple[BoundaryPoint, BoundaryPoint]:
    """Boundary points realizing R1 and R2, with normals checked against x - x̄."""
    _check_xbar(d)
    R1, R2 = radii(d)
    if R2 - R1 < 1e-9 * R2 and d.is_parametric:
        p = _param_point(d, 0.0)
        p1 = p2 = p
    elif _centered(d):
        p1, p2 = _param_point(d, 0.0), _param_point(d, 0.5 * math.pi)
    elif d.kind == "ball":
        cx, cy = d.center
        v = np.array([cx - d.xbar[0], cy - d.xbar[1]])
        v /= np.linalg.norm(v)
        t2 = math.atan2(v[1], v[0]) % (2 * math.pi)
        p1, p2 = _param_point(d, (t2 + math.pi) % (2 * math.pi)), _param_point(d, t2)
    else:
        p1, p2 = _extremes(d)
    xb = np.asarray(d.xbar)
    for P in (p1, p2):
        v = P.location - xb
        v /= np.linalg.norm(v)
        ang = math.atan2(abs(v[0] * P.outer_normal[1] - v[1] * P.outer_normal[0]), float(v @ P.outer_normal))
        if ang > NORMAL_ANGLE_TOL:
            raise GeometryInconsistencyError(
                f"outer normal at touching point {P.location} deviates {ang:.3e} rad from the radial direction"
            )
    return p1, p2


def segment_crossing(d: Domain, p0, p1) -> float:
    """Fraction t in (0, 1] with p0 + t (p1 - p0) on the boundary; p0 inside, p1 outside."""
    p0 = np.asarray(p0, dtype=float)
    v = np.asarray(p1, dtype=float) - p0
    if d.is_parametric:
        a, b = d.semi_axes
        w = p0 - np.asarray(d.center)
        A = (v[0] / a) ** 2 + (v[1] / b) ** 2
        B = 2.0 * (w[0] * v[0] / a**2 + w[1] * v[1] / b**2)
        C = (w[0] / a) ** 2 + (w[1] / b) ** 2 - 1.0
        t = (-B + math.sqrt(B * B - 4 * A * C)) / (2 * A)
        return min(max(t, 0.0), 1.0)
    return optimize.brentq(lambda t: float(d.level(*(p0 + t * v))), 0.0, 1.0, xtol=1e-15)


def boundary_csv_rows(points: list[BoundaryPoint]) -> list[tuple[float, ...]]:
    return [
        (bp.arc_parameter, bp.location[0], bp.location[1], bp.outer_normal[0], bp.outer_normal[1], bp.curvature)
        for bp in points
    ]
