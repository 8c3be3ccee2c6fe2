"""Uniform grids clipped to a domain."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from ..geometry import Domain, boundary_sample, segment_crossing

__all__ = [
    "GridField",
    "InsufficientResolutionError",
    "make_grid",
    "sample_field",
    "EXTERIOR",
    "INTERIOR",
    "BOUNDARY_ADJACENT",
    "OFFSETS",
]

EXTERIOR, INTERIOR, BOUNDARY_ADJACENT = 0, 1, 2

# (di, dj) for E, W, N, S, NE, NW, SE, SW; arm k and arm k ^ 1 are opposite
OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1))
ARM_LENGTH = np.array([1.0, 1.0, 1.0, 1.0, math.sqrt(2), math.sqrt(2), math.sqrt(2), math.sqrt(2)])

THETA_FLOOR = 1e-8
# semi-Lagrangian radius: EPS_FACTOR * sqrt(h * L), L the half-width of the bounding box
EPS_FACTOR = 2.0
# below this many cells of usable radius a node falls back to the 3x3 stencil
MIN_SL_CELLS = 3
# a sample must stay this many cells away from the boundary so its interpolation cell is interior
SL_CLEARANCE = 1.5


class InsufficientResolutionError(ValueError):
    pass


def _as_func(f) -> Callable:
    if callable(f):
        return f
    val = float(f)
    return lambda x, y: np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, val)


@dataclass
class GridField:
    """Grid function on the nodes of a uniform grid clipped to a domain.

    ``values[i, j]`` lives at ``origin + h * (i, j)``.  Interior nodes carry
    the unknowns.  Exterior nodes reached by a cut stencil arm hold the
    linear ghost value u0 + (g(b) - u0)/θ (averaged over the arms reaching
    them), all other exterior nodes are NaN.
    """

    domain: Domain
    h: float
    origin: tuple[float, float]
    values: np.ndarray
    kind: np.ndarray
    g: Callable
    index: np.ndarray = field(repr=False, default=None)
    nodes: np.ndarray = field(repr=False, default=None)
    # per interior node and arm: neighbour index (-1 if cut), cut fraction, boundary datum
    nbr: np.ndarray = field(repr=False, default=None)
    theta: np.ndarray = field(repr=False, default=None)
    gval: np.ndarray = field(repr=False, default=None)
    # per interior node: distance to the boundary and semi-Lagrangian radius (0 -> 3x3 stencil)
    dist: np.ndarray = field(repr=False, default=None)
    radius: np.ndarray = field(repr=False, default=None)

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_interior(self) -> int:
        return len(self.nodes)

    def coords(self):
        nx, ny = self.values.shape
        x = self.origin[0] + self.h * np.arange(nx)
        y = self.origin[1] + self.h * np.arange(ny)
        return np.meshgrid(x, y, indexing="ij")

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.nodes[:, 0], self.nodes[:, 1]]

    def interior_points(self) -> np.ndarray:
        return np.asarray(self.origin) + self.h * self.nodes

    def with_interior(self, u: np.ndarray) -> "GridField":
        out = replace(self, values=np.full(self.shape, np.nan))
        out.values[self.nodes[:, 0], self.nodes[:, 1]] = u
        _fill_ghost_band(out, np.asarray(u, dtype=float))
        return out

    def interpolate(self, x: float, y: float) -> float:
        """Bilinear interpolation; raises if a cell corner carries no value."""
        fx = (x - self.origin[0]) / self.h
        fy = (y - self.origin[1]) / self.h
        i, j = int(math.floor(fx)), int(math.floor(fy))
        nx, ny = self.shape
        if not (0 <= i < nx - 1 and 0 <= j < ny - 1):
            raise InsufficientResolutionError(f"point ({x}, {y}) lies outside the grid")
        c = self.values[i:i + 2, j:j + 2]
        if not np.all(np.isfinite(c)):
            raise InsufficientResolutionError(f"interpolation cell at ({x}, {y}) has undefined corners")
        s, t = fx - i, fy - j
        return float(c[0, 0] * (1 - s) * (1 - t) + c[1, 0] * s * (1 - t) + c[0, 1] * (1 - s) * t + c[1, 1] * s * t)

    def neighbour_values(self, u: np.ndarray) -> np.ndarray:
        """(M, 8) arm values, cut arms replaced by linear ghosts."""
        nb = self.nbr
        v = u[np.maximum(nb, 0)]
        ghost = u[:, None] + (self.gval - u[:, None]) / self.theta
        return np.where(nb < 0, ghost, v)


def _fill_ghost_band(fld: GridField, u: np.ndarray) -> None:
    v = fld.neighbour_values(u)
    acc = np.zeros(fld.shape)
    cnt = np.zeros(fld.shape)
    for k, (di, dj) in enumerate(OFFSETS):
        m = np.flatnonzero(fld.nbr[:, k] < 0)
        if m.size == 0:
            continue
        ti = fld.nodes[m, 0] + di
        tj = fld.nodes[m, 1] + dj
        np.add.at(acc, (ti, tj), v[m, k])
        np.add.at(cnt, (ti, tj), 1.0)
    band = cnt > 0
    fld.values[band] = acc[band] / cnt[band]


def _boundary_distance(d: Domain, pts: np.ndarray, h: float) -> np.ndarray:
    x0, x1, y0, y1 = d.bbox
    perimeter_bound = 2.0 * ((x1 - x0) + (y1 - y0))
    m = max(4096, int(8 * perimeter_bound / h))
    bps = boundary_sample(d, m)
    tree = cKDTree(np.array([bp.location for bp in bps]))
    dist, _ = tree.query(pts)
    return dist


def make_grid(d: Domain, h: float, g=0.0, init=None, eps: Optional[float] = None) -> GridField:
    """Classify nodes, cut stencil arms at the boundary and pick per-node radii.

    ``init`` gives the initial interior values, as a callable of (x, y) or an array.
    """
    g = _as_func(g)
    x0, x1, y0, y1 = d.bbox
    cx, cy = (0.5 * (x0 + x1), 0.5 * (y0 + y1)) if not d.is_parametric else d.center
    Nx = int(math.ceil(0.5 * (x1 - x0) / h)) + 2
    Ny = int(math.ceil(0.5 * (y1 - y0) / h)) + 2
    origin = (cx - Nx * h, cy - Ny * h)
    X, Y = np.meshgrid(cx + (np.arange(2 * Nx + 1) - Nx) * h, cy + (np.arange(2 * Ny + 1) - Ny) * h, indexing="ij")
    inside = d.level(X, Y) < 0.0
    kind = np.where(inside, INTERIOR, EXTERIOR).astype(np.int8)
    nodes = np.argwhere(inside)
    index = np.full(inside.shape, -1, dtype=np.int64)
    index[nodes[:, 0], nodes[:, 1]] = np.arange(len(nodes))
    M = len(nodes)
    nbr = np.empty((M, 8), dtype=np.int64)
    theta = np.ones((M, 8))
    gval = np.zeros((M, 8))
    for k, (di, dj) in enumerate(OFFSETS):
        nbr[:, k] = index[nodes[:, 0] + di, nodes[:, 1] + dj]
        for m in np.flatnonzero(nbr[:, k] < 0):
            i, j = nodes[m]
            p0 = (X[i, j], Y[i, j])
            p1 = (X[i + di, j + dj], Y[i + di, j + dj])
            t = max(segment_crossing(d, p0, p1), THETA_FLOOR)
            theta[m, k] = t
            gval[m, k] = float(g(p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])))
    adj = np.any(nbr < 0, axis=1)
    kind[nodes[adj, 0], nodes[adj, 1]] = BOUNDARY_ADJACENT
    pts = np.asarray(origin) + h * nodes
    dist = _boundary_distance(d, pts, h) if M else np.zeros(0)
    if eps is None:
        eps = EPS_FACTOR * math.sqrt(h * 0.5 * min(x1 - x0, y1 - y0))
    # Bulk nodes use eps itself (rounding it to whole cells would make the
    # interpolation error (h/eps)^2 jump between grids); nodes closer to the
    # boundary round down to whole cells so they share a few sample patterns.
    usable = dist - SL_CLEARANCE * h
    radius = np.where(usable >= eps, eps, h * np.floor(usable / h))
    radius[radius < MIN_SL_CELLS * h] = 0.0
    fld = GridField(d, h, origin, np.full(inside.shape, np.nan), kind, g, index, nodes, nbr, theta, gval, dist, radius)
    if init is None:
        u0 = np.zeros(M)
    elif callable(init):
        u0 = np.asarray(init(pts[:, 0], pts[:, 1]), dtype=float) * np.ones(M)
    else:
        u0 = np.asarray(init, dtype=float)
    return fld.with_interior(u0)


def sample_field(d: Domain, h: float, fn: Callable, **kw) -> GridField:
    """Grid field holding ``fn`` at interior nodes, with ``fn`` also as boundary datum."""
    return make_grid(d, h, g=fn, init=fn, **kw)
