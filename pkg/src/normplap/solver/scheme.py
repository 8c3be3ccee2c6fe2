"""Monotone discretization of the normalized p-Laplacian on a GridField.

The operator is split into nonnegative multiples of three pieces,

    p >= 2 :  (1/p) Δ_h      + ((p-2)/p) T_h
    p <  2 :  ((p-1)/p) T_h  + (1/p) Ξ_h
    p = inf:  T_h

with Δ_h the 5-point Laplacian (Shortley-Weller arms where cut), T_h the
second difference along the gradient and Ξ_h the one across it.

Away from the boundary the samples lie on the circle of radius r = ``fld.radius``
around the node, bilinearly interpolated at K equally spaced directions:

    T_h u = (max_φ I(φ) + min_φ I(φ) - 2 u) / r^2
    Ξ_h u = (min_φ max(I(φ), I(φ+π)) + max_φ min(I(φ), I(φ+π)) - 2 u) / r^2

Ξ_h treats I as linear in φ between directions, so its extremum sits on the
level line of u through the node (where I(φ) = I(φ+π)) rather than on the
nearest sample direction.  Both are monotone and piecewise linear in u, and
at a critical point of a quadratic both return (λ_min + λ_max)/2, the
envelope midpoint.

Within a few cells of the boundary the 3x3 neighbourhood is used.  There the
direction of the centred gradient (lagged in the iteration) selects the
second difference, blended linearly in angle between the two nearest arm
pairs; where |∇_h u| < h the directional terms fade linearly into Δ_h/2
(fully below h/2).  Cut arms carry the datum g at the crossing.

:func:`linearize` returns a sparse A and vector c with L_h(u) = A u + c and
A a Newton (generalized) Jacobian; its off-diagonal entries are nonnegative.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from ..operators import PValue
from .grid import ARM_LENGTH, GridField

__all__ = ["split_weights", "linearize", "apply_operator", "direction_count"]

ANGLE_BUDGET = 0.05
MIN_DIRECTIONS = 32


def split_weights(p: PValue) -> tuple[float, float, float]:
    """Weights of (Δ_h, T_h, Ξ_h)."""
    if p.infinite:
        return 0.0, 1.0, 0.0
    pv = p.value
    if pv >= 2.0:
        return 1.0 / pv, (pv - 2.0) / pv, 0.0
    return 0.0, (pv - 1.0) / pv, 1.0 / pv


class _Builder:
    def __init__(self, M: int):
        self.M = M
        self.rows, self.cols, self.vals = [], [], []
        self.diag = np.zeros(M)
        self.const = np.zeros(M)

    def add(self, r, c, v):
        self.rows.append(np.asarray(r).ravel())
        self.cols.append(np.asarray(c).ravel())
        self.vals.append(np.asarray(v, dtype=float).ravel())

    def matrix(self) -> sp.csr_matrix:
        ar = np.arange(self.M)
        r = np.concatenate(self.rows + [ar])
        c = np.concatenate(self.cols + [ar])
        v = np.concatenate(self.vals + [self.diag])
        return sp.csr_matrix((v, (r, c)), shape=(self.M, self.M))


def _full(fld: GridField, u: np.ndarray) -> np.ndarray:
    U = np.zeros(fld.shape)
    U[fld.nodes[:, 0], fld.nodes[:, 1]] = u
    return U


def _bilinear(fld: GridField, P: np.ndarray):
    """Corner interior indices (n, 4) and weights (n, 4) for points P (n, 2)."""
    f = (P - np.asarray(fld.origin)) / fld.h
    i0 = np.floor(f).astype(np.int64)
    s = f[:, 0] - i0[:, 0]
    t = f[:, 1] - i0[:, 1]
    i, j = i0[:, 0], i0[:, 1]
    idx = np.stack([fld.index[i, j], fld.index[i + 1, j], fld.index[i, j + 1], fld.index[i + 1, j + 1]], axis=1)
    w = np.stack([(1 - s) * (1 - t), s * (1 - t), (1 - s) * t, s * t], axis=1)
    return idx, w


def direction_count(h: float, eps: float) -> int:
    """Number K of equally spaced sample directions (a multiple of 8).

    Missing the extremal direction by π/K costs about |∇u| (π/K)^2 / (2 eps)
    in the second difference; K is chosen so this stays below ANGLE_BUDGET * h.
    """
    k = math.pi / math.sqrt(2.0 * eps * h * ANGLE_BUDGET)
    return max(MIN_DIRECTIONS, 8 * int(math.ceil(k / 8.0)))


def _circle_values(fld: GridField, U: np.ndarray, m: np.ndarray):
    """Angles (K,) and bilinear samples V (len(m), K) on each node's circle.

    Nodes with equal radius share the offsets and bilinear weights of every
    sample, so each direction costs four gathers per group.
    """
    r_all = fld.radius[m]
    K = direction_count(fld.h, float(np.max(r_all)))
    phis = 2.0 * np.pi * np.arange(K) / K
    ny = U.shape[1]
    Uf = U.ravel()
    base_all = fld.nodes[m, 0] * ny + fld.nodes[m, 1]
    V = np.empty((len(m), K))
    for r in np.unique(r_all):
        sel = np.flatnonzero(r_all == r)
        base = base_all[sel]
        fx = r * np.cos(phis) / fld.h
        fy = r * np.sin(phis) / fld.h
        ax, ay = np.floor(fx), np.floor(fy)
        sx, sy = fx - ax, fy - ay
        for k in range(K):
            o = base + (int(ax[k]) * ny + int(ay[k]))
            V[sel, k] = ((1 - sx[k]) * (1 - sy[k])) * Uf[o] + (sx[k] * (1 - sy[k])) * Uf[o + ny] \
                + ((1 - sx[k]) * sy[k]) * Uf[o + 1] + (sx[k] * sy[k]) * Uf[o + ny + 1]
    return phis, V


def _level_policy(phis: np.ndarray, V: np.ndarray, upper: bool):
    """Sample angles and weights (n, 4) realizing min_φ max(I(φ), I(φ+π)) (upper)
    or max_φ min(I(φ), I(φ+π)), with I linear in φ between sample directions.

    On each segment the extremum sits at an end or at the crossing of the two
    opposite interpolants.  At a crossing the weights λ, 1-λ on the two sides
    are the Danskin multipliers, so the weighted sum is both the value and its
    derivative in u.
    """
    n, K = V.shape
    H = K // 2
    a0, b0 = V[:, :H], V[:, H:]
    a1 = V[:, 1:H + 1]
    b1 = np.concatenate([V[:, H + 1:], V[:, :1]], axis=1)
    sgn = 1.0 if upper else -1.0
    # ends: max (upper) or min of the opposite pair
    end = np.maximum(a0, b0) if upper else np.minimum(a0, b0)
    d0, d1 = a0 - b0, a1 - b1
    cross = d0 * d1 < 0
    t = np.where(cross, d0 / np.where(cross, d0 - d1, 1.0), 0.0)
    cval = np.where(cross, a0 + t * (a1 - a0), np.nan)
    # pick the extremum over ends and crossings (min for upper, max otherwise)
    cand = np.concatenate([sgn * end, np.where(cross, sgn * cval, np.inf)], axis=1)
    j = np.argmin(cand, axis=1)
    rows = np.arange(n)
    at_cross = j >= H
    k = np.where(at_cross, j - H, j)
    tt = np.where(at_cross, t[rows, k], 0.0)
    da = a1[rows, k] - a0[rows, k]
    db = b1[rows, k] - b0[rows, k]
    den = db - da
    lam_c = np.clip(np.where(den != 0, db / np.where(den != 0, den, 1.0), 0.5), 0.0, 1.0)
    side_a = a0[rows, k] >= b0[rows, k] if upper else a0[rows, k] <= b0[rows, k]
    lam = np.where(at_cross, lam_c, side_a.astype(float))
    ang = np.stack([phis[k], phis[k + 1], phis[k] + np.pi, phis[k + 1] + np.pi], axis=1)
    wts = np.stack([lam * (1 - tt), lam * tt, (1 - lam) * (1 - tt), (1 - lam) * tt], axis=1)
    return ang, wts


def _add_laplacian(B: _Builder, fld: GridField, m: np.ndarray, w: np.ndarray) -> None:
    """5-point Laplacian; cut arms use the unequal-arm (Shortley-Weller) form."""
    if m.size == 0:
        return
    _add_two_arms(B, fld, m, 0, 1, w)
    _add_two_arms(B, fld, m, 2, 3, w)


def _add_two_arms(B: _Builder, fld: GridField, m, kp, km, w) -> None:
    """w * 2/(d+ + d-) * ((v+ - u0)/d+ + (v- - u0)/d-) along two 3x3 arms."""
    if m.size == 0:
        return
    h = fld.h
    dp = h * ARM_LENGTH[kp] * fld.theta[m, kp]
    dm = h * ARM_LENGTH[km] * fld.theta[m, km]
    cp = w * 2.0 / ((dp + dm) * dp)
    cm = w * 2.0 / ((dp + dm) * dm)
    for k, c in ((kp, cp), (km, cm)):
        nb = fld.nbr[m, k]
        cut = nb < 0
        B.add(m[~cut], nb[~cut], c[~cut])
        B.const[m[cut]] += c[cut] * fld.gval[m, k][cut]
        B.diag[m] -= c


def _add_circle_samples(B: _Builder, fld: GridField, m, X, r, ang, wts, w) -> None:
    """w / r^2 * (sum_s wts_s I(x + r e(ang_s)) - sum_s wts_s u0) with bilinear I."""
    if m.size == 0:
        return
    c = w / r**2
    for phi, wt in zip(ang.T, wts.T):
        P = X + r[:, None] * np.stack([np.cos(phi), np.sin(phi)], axis=1)
        idx, bw = _bilinear(fld, P)
        if np.any(idx < 0):
            raise RuntimeError("semi-Lagrangian sample fell into a cell with exterior corners")
        B.add(np.repeat(m, 4), idx, bw * (c * wt)[:, None])
    B.diag[m] -= c * wts.sum(axis=1)


# arm pairs ordered by angle: 0, 45, 90, 135 degrees
_PAIRS_BY_ANGLE = np.array([[0, 1], [4, 5], [2, 3], [6, 7]])


def _add_direction(B: _Builder, fld: GridField, m, ang, w) -> None:
    """Second difference along angle ``ang``, blended linearly in angle between
    the two nearest 3x3 arm pairs (continuous in ``ang``)."""
    if m.size == 0:
        return
    q = np.mod(ang, np.pi) / (0.25 * np.pi)
    seg = np.minimum(np.floor(q).astype(np.int64), 3)
    beta = q - seg
    for pr, wb in ((_PAIRS_BY_ANGLE[seg], 1.0 - beta), (_PAIRS_BY_ANGLE[(seg + 1) % 4], beta)):
        _add_two_arms(B, fld, m, pr[:, 0], pr[:, 1], w * wb)


def linearize(p: PValue, fld: GridField, u: np.ndarray):
    """(A, c) with L_h(u) = A @ u + c, extremal directions frozen at ``u``."""
    wl, wt, wx = split_weights(p)
    M = fld.n_interior
    B = _Builder(M)
    allm = np.arange(M)
    sl = fld.radius > 0
    X = fld.interior_points()
    U = _full(fld, u)

    if wl > 0:
        _add_laplacian(B, fld, allm, np.full(M, wl))

    ms = np.flatnonzero(sl)
    if ms.size and (wt > 0 or wx > 0):
        phis, V = _circle_values(fld, U, ms)
        r = fld.radius[ms]
        if wt > 0:
            ang = np.stack([phis[np.argmax(V, axis=1)], phis[np.argmin(V, axis=1)]], axis=1)
            _add_circle_samples(B, fld, ms, X[ms], r, ang, np.ones_like(ang), np.full(ms.size, wt))
        if wx > 0:
            for upper in (True, False):
                ang, wts = _level_policy(phis, V, upper)
                _add_circle_samples(B, fld, ms, X[ms], r, ang, wts, np.full(ms.size, wx))

    m = np.flatnonzero(~sl)
    if m.size and (wt > 0 or wx > 0):
        v = fld.neighbour_values(u)[m]
        gx = (v[:, 0] - v[:, 1]) / (2 * fld.h)
        gy = (v[:, 2] - v[:, 3]) / (2 * fld.h)
        # directional share: 0 below |grad| = h/2, 1 above h, linear between
        s = np.clip(2.0 * np.hypot(gx, gy) / fld.h - 1.0, 0.0, 1.0)
        low = s < 1.0
        _add_laplacian(B, fld, m[low], 0.5 * (wt + wx) * (1.0 - s[low]))
        nu = np.arctan2(gy, gx)
        k = s > 0.0
        for w, ang in ((wt, nu), (wx, nu + 0.5 * np.pi)):
            if w > 0:
                _add_direction(B, fld, m[k], ang[k], w * s[k])

    return B.matrix(), B.const


def apply_operator(p: PValue, fld: GridField, u: np.ndarray) -> np.ndarray:
    A, c = linearize(p, fld, u)
    return A @ u + c
