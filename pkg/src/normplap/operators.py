"""Normalized and classical p-Laplacians evaluated on second-order jets.

A jet is the pair (gradient, Hessian) of a function at a point.  For a
nonzero gradient ``g`` and Hessian ``H`` the normalized operator is

    (trace(H) + (p - 2) <H g, g> / |g|^2) / p      (finite p)
    <H g, g> / |g|^2                                (p = inf)

At critical points (g = 0) only the upper and lower envelopes are defined;
they are built from the extreme Hessian eigenvalues.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "PValue",
    "Jet",
    "CriticalPointError",
    "as_p",
    "c_p",
    "hessian_eigenvalues",
    "eval_normalized",
    "eval_normalized_batch",
    "eval_upper",
    "eval_lower",
    "eval_classical",
    "envelope_forms",
]

# |g| below this (scaled by max(1, ||H||)) is treated as a critical point.
GRADIENT_EPS = 1e-12


class CriticalPointError(ValueError):
    """Raised when the normalized operator is requested where Du = 0."""


@dataclass(frozen=True)
class PValue:
    """Exponent p in [1, inf].  Infinity is a tag, never a large float."""

    value: float = 2.0
    infinite: bool = False

    def __post_init__(self):
        if self.infinite:
            object.__setattr__(self, "value", math.inf)
            return
        v = float(self.value)
        if math.isinf(v) and v > 0:
            object.__setattr__(self, "infinite", True)
            object.__setattr__(self, "value", math.inf)
            return
        if not math.isfinite(v) or v < 1.0:
            raise ValueError(f"p must lie in [1, inf], got {self.value!r}")
        object.__setattr__(self, "value", v)

    @classmethod
    def inf(cls) -> "PValue":
        return cls(infinite=True)

    @classmethod
    def parse(cls, text: str) -> "PValue":
        t = text.strip().lower()
        if t in ("inf", "infinity", "∞"):
            return cls.inf()
        return cls(float(t))

    @property
    def is_finite(self) -> bool:
        return not self.infinite

    def __str__(self) -> str:
        return "inf" if self.infinite else repr(self.value)


PLike = Union[PValue, float, int, str]


def as_p(p: PLike) -> PValue:
    if isinstance(p, PValue):
        return p
    if isinstance(p, str):
        return PValue.parse(p)
    return PValue(float(p))


class Jet:
    """Gradient and symmetric Hessian of a function at a point.

    Only the upper triangle of ``hessian`` is read; the stored matrix is its
    exact symmetric completion.
    """

    __slots__ = ("gradient", "hessian")

    def __init__(self, gradient, hessian):
        g = np.array(gradient, dtype=float).reshape(-1)
        H = np.array(hessian, dtype=float)
        n = g.size
        if n < 2:
            raise ValueError("jets need dimension n >= 2")
        if H.shape != (n, n):
            raise ValueError(f"hessian shape {H.shape} does not match gradient of length {n}")
        upper = np.triu(H)
        self.gradient = g
        self.hessian = upper + np.triu(H, 1).T
        self.gradient.setflags(write=False)
        self.hessian.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.gradient.size

    def rotated(self, Q) -> "Jet":
        Q = np.asarray(Q, dtype=float)
        return Jet(Q @ self.gradient, Q @ self.hessian @ Q.T)

    def scaled(self, s: float) -> "Jet":
        return Jet(s * self.gradient, s * self.hessian)

    def __repr__(self) -> str:
        return f"Jet(gradient={self.gradient.tolist()}, hessian={self.hessian.tolist()})"


def c_p(p: PLike, n: int) -> float:
    """Constant of the radial solution: p/(p+n-2), or 1 for p = inf."""
    if n < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")
    p = as_p(p)
    if p.infinite:
        return 1.0
    return p.value / (p.value + n - 2)


def _eig2(H) -> list[float]:
    a, b, d = float(H[0][0]), float(H[0][1]), float(H[1][1])
    m = 0.5 * (a + d)
    r = math.hypot(0.5 * (a - d), b)
    return [m - r, m + r]


def _jacobi3(H, sweeps: int = 50) -> list[float]:
    A = np.array(H, dtype=float)
    for _ in range(sweeps):
        off = A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2
        if off <= 1e-36 * max(1.0, float(np.sum(A * A))):
            break
        for i, j in ((0, 1), (0, 2), (1, 2)):
            if A[i, j] == 0.0:
                continue
            diff = A[j, j] - A[i, i]
            if abs(diff) > 1e150 * abs(A[i, j]):
                t = A[i, j] / diff  # t ≈ 1/(2θ) without forming θ
            else:
                theta = diff / (2.0 * A[i, j])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            R = np.eye(3)
            R[i, i] = R[j, j] = c
            R[i, j] = s
            R[j, i] = -s
            A = R.T @ A @ R
    return sorted(float(x) for x in np.diag(A))


def _eig3(H) -> list[float]:
    A = np.array(H, dtype=float)
    off = A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2
    if off == 0.0:
        return sorted(float(x) for x in np.diag(A))
    q = np.trace(A) / 3.0
    p2 = float(np.sum((np.diag(A) - q) ** 2) + 2.0 * off)
    p = math.sqrt(p2 / 6.0)
    B = (A - q * np.eye(3)) / p
    r = float(np.linalg.det(B)) / 2.0
    # acos loses accuracy near |r| = 1 (nearly repeated eigenvalues)
    if abs(r) > 1.0 - 1e-6:
        return _jacobi3(A)
    phi = math.acos(r) / 3.0
    e1 = q + 2.0 * p * math.cos(phi)
    e3 = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    e2 = 3.0 * q - e1 - e3
    return sorted([e1, e2, e3])


def hessian_eigenvalues(H) -> list[float]:
    """Ascending eigenvalues of a symmetric 2x2 or 3x3 matrix, in closed form."""
    A = np.asarray(H, dtype=float)
    n = A.shape[0]
    if n == 2:
        return _eig2(A)
    if n == 3:
        return _eig3(A)
    raise ValueError(f"closed-form eigenvalues only for n in (2, 3), got {n}")


def _eigs(H) -> list[float]:
    n = H.shape[0]
    if n in (2, 3):
        return hessian_eigenvalues(H)
    return [float(x) for x in np.linalg.eigvalsh(H)]


def _is_critical(jet: Jet) -> bool:
    scale = max(1.0, float(np.linalg.norm(jet.hessian, 2)))
    return float(np.linalg.norm(jet.gradient)) < GRADIENT_EPS * scale


def _infinity_term(jet: Jet) -> float:
    g = jet.gradient
    return float(g @ jet.hessian @ g) / float(g @ g)


def eval_normalized(p: PLike, jet: Jet) -> float:
    """Normalized p-Laplacian of a jet with nonvanishing gradient."""
    p = as_p(p)
    if _is_critical(jet):
        raise CriticalPointError(
            "normalized p-Laplacian is undefined at a critical point; "
            "use eval_upper / eval_lower there"
        )
    dinf = _infinity_term(jet)
    if p.infinite:
        return dinf
    return (float(np.trace(jet.hessian)) + (p.value - 2.0) * dinf) / p.value


def eval_normalized_batch(p: PLike, gradients, hessians) -> np.ndarray:
    """Vectorized ``eval_normalized`` over stacks of shape (m, n) and (m, n, n).

    Uses the same critical-point test (Frobenius norm in place of the spectral
    norm, which only makes the test stricter) and raises if any jet fails it.
    """
    p = as_p(p)
    G = np.asarray(gradients, dtype=float)
    H = np.asarray(hessians, dtype=float)
    if G.ndim != 2 or H.shape != G.shape + (G.shape[1],):
        raise ValueError("expected gradients (m, n) and hessians (m, n, n)")
    H = np.triu(H) + np.swapaxes(np.triu(H, 1), 1, 2)
    gg = np.einsum("mi,mi->m", G, G)
    scale = np.maximum(1.0, np.sqrt(np.einsum("mij,mij->m", H, H)))
    if np.any(np.sqrt(gg) < GRADIENT_EPS * scale):
        raise CriticalPointError("batch contains a critical point; use eval_upper / eval_lower there")
    dinf = np.einsum("mi,mij,mj->m", G, H, G) / gg
    if p.infinite:
        return dinf
    return (np.trace(H, axis1=1, axis2=2) + (p.value - 2.0) * dinf) / p.value


def envelope_forms(p: PLike, eigs) -> dict[str, tuple[float, float]]:
    """Both displayed forms of the (upper, lower) envelopes at a critical point.

    ``"sum"`` is the eigenvalue-sum form, ``"extreme"`` the form written with
    the extreme eigenvalue and the trace.  They coincide for every p.
    """
    p = as_p(p)
    lam = sorted(float(x) for x in eigs)
    lo, hi = lam[0], lam[-1]
    if p.infinite:
        return {"sum": (hi, lo), "extreme": (hi, lo)}
    pv = p.value
    trace = math.fsum(lam)
    rest_lo = math.fsum(lam[1:])   # sum without lambda_min
    rest_hi = math.fsum(lam[:-1])  # sum without lambda_max
    w = (pv - 1.0) / pv
    if pv <= 2.0:
        up_sum = w * lo + rest_lo / pv
        low_sum = w * hi + rest_hi / pv
    else:
        up_sum = w * hi + rest_hi / pv
        low_sum = w * lo + rest_lo / pv
    k = (pv - 2.0) / pv
    if pv <= 2.0:
        up_ext, low_ext = k * lo + trace / pv, k * hi + trace / pv
    else:
        up_ext, low_ext = k * hi + trace / pv, k * lo + trace / pv
    return {"sum": (up_sum, low_sum), "extreme": (up_ext, low_ext)}


def _envelopes(p: PValue, jet: Jet) -> tuple[float, float]:
    return envelope_forms(p, _eigs(jet.hessian))["extreme"]


def eval_upper(p: PLike, jet: Jet) -> float:
    """Upper envelope; equals the normalized operator away from critical points."""
    p = as_p(p)
    if not _is_critical(jet):
        return eval_normalized(p, jet)
    return _envelopes(p, jet)[0]


def eval_lower(p: PLike, jet: Jet) -> float:
    """Lower envelope; equals the normalized operator away from critical points."""
    p = as_p(p)
    if not _is_critical(jet):
        return eval_normalized(p, jet)
    return _envelopes(p, jet)[1]


def eval_classical(p: PLike, jet: Jet) -> float:
    """Divergence-form p-Laplacian div(|Du|^(p-2) Du); <H g, g> for p = inf."""
    p = as_p(p)
    g, H = jet.gradient, jet.hessian
    if p.infinite:
        return float(g @ H @ g)
    pv = p.value
    if pv == 2.0:
        return float(np.trace(H))
    if _is_critical(jet):
        if pv < 2.0:
            raise ValueError(f"classical p-Laplacian with p={pv} < 2 is singular at Du = 0")
        return 0.0
    gn = float(np.linalg.norm(g))
    return gn ** (pv - 2.0) * (float(np.trace(H)) + (pv - 2.0) * _infinity_term(jet))
