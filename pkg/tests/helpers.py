"""Shared fixtures data and a cache of grid solves reused across test modules."""
import functools
import math

import numpy as np

from normplap.geometry import ball, ellipse
from normplap.operators import Jet, PValue
from normplap.solver import solve_dirichlet

# criterion number -> (passed, detail); filled by test_acceptance, printed by conftest
ACCEPTANCE: dict[int, tuple[bool, str]] = {}

BALL_PS = ("1.5", "2", "3", "10", "inf")


def record(k: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[k] = (bool(ok), detail)


def random_jet(rng, n: int, gmin: float = 1e-6, gmax: float = 10.0) -> Jet:
    g = rng.normal(size=n)
    g *= math.exp(rng.uniform(math.log(gmin), math.log(gmax))) / np.linalg.norm(g)
    A = rng.normal(size=(n, n))
    return Jet(g, A + A.T)


def random_rotation(rng, n: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.normal(size=(n, n)))
    return Q * np.sign(np.diag(R))


@functools.lru_cache(maxsize=None)
def solved_ball(p: str, h: float):
    """Unit disc, f = 1, g = 0; cached so acceptance criteria 3 and 4 share solves."""
    return solve_dirichlet(ball(1.0), PValue.parse(p), f=1.0, g=0.0, h=h, tol=1e-9)


@functools.lru_cache(maxsize=None)
def solved_ellipse(p: str, h: float = 1.0 / 64):
    return solve_dirichlet(ellipse(0.8, 1.2), PValue.parse(p), f=1.0, g=0.0, h=h, tol=1e-9)
