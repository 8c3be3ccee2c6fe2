import json

import numpy as np
import pytest
import scipy.sparse as sp

from helpers import random_jet, solved_ellipse
from normplap.geometry import ball, boundary_sample, ellipse, radii
from normplap.geometry import BoundaryPoint
from normplap.operators import Jet, PValue, c_p, eval_normalized
from normplap.solver import (
    BOUNDARY_ADJACENT,
    INTERIOR,
    InsufficientResolutionError,
    UnsupportedExponentError,
    boundary_normal_derivative,
    discrete_operator,
    discrete_operator_field,
    existence_guard,
    linearize,
    make_grid,
    sample_field,
    solve_dirichlet,
    split_weights,
)

INF = PValue.inf()
H = 1.0 / 64


def u_ball(cp, R=1.0):
    return lambda x, y: 0.5 * cp * (R * R - x * x - y * y)


def bulk(fld):
    """Nodes that use the full semi-Lagrangian radius."""
    return fld.radius == fld.radius.max()


# --- scheme -------------------------------------------------------------------------

@pytest.mark.parametrize("p", [PValue(1.1), PValue(1.5), PValue(2), PValue(3), PValue(10), INF])
@pytest.mark.parametrize("seed", range(5))
def test_split_weights_reassemble_the_operator(p, seed):
    # Laplacian, gradient-direction and across-gradient parts recombine into Δ_p^N
    j = random_jet(np.random.default_rng(seed), 2, gmin=0.1)
    wl, wt, wx = split_weights(p)
    tr = float(np.trace(j.hessian))
    dinf = eval_normalized(INF, j)
    assert wl * tr + wt * dinf + wx * (tr - dinf) == pytest.approx(eval_normalized(p, j), abs=1e-12)


@pytest.mark.parametrize("p", ["1.5", "2", "inf"])
def test_constant_field_gives_zero(p):
    fld = sample_field(ball(1.0), H, lambda x, y: 3.0 + 0 * x)
    assert np.max(np.abs(discrete_operator_field(PValue.parse(p), fld))) < 1e-8


def test_radial_field_p2_exact_on_quadratics():
    fld = sample_field(ball(1.0), H, u_ball(1.0))
    assert np.max(np.abs(discrete_operator_field(PValue(2), fld) + 1.0)) < 1e-9


def test_x_squared_p_infinity_in_the_bulk():
    errs = []
    for h in (1 / 32, 1 / 64, 1 / 128):
        fld = sample_field(ball(1.0), h, lambda x, y: x**2 + 0 * y)
        X = fld.interior_points()
        m = (X[:, 0] > 0.2) & bulk(fld)
        errs.append(np.max(np.abs(discrete_operator_field(INF, fld)[m] - 2.0)))
    assert errs[1] < 0.05 and errs[2] < errs[1] < errs[0]


@pytest.mark.parametrize("p", ["1.5", "3", "10", "inf"])
def test_radial_field_consistency_in_the_bulk(p):
    fld = sample_field(ball(1.0), H, u_ball(1.0))
    L = discrete_operator_field(PValue.parse(p), fld)
    assert np.max(np.abs(L[bulk(fld)] + 1.0)) < 0.01


@pytest.mark.parametrize("p", ["1.2", "1.5", "3", "inf"])
def test_tilted_quadratic_in_the_bulk(p):
    # gradient direction varies across the grid, so Ξ_h must find the level line
    A = np.array([[0.6, -0.2], [-0.2, 1.0]])
    b = np.array([1.0, 0.5])
    fld = sample_field(ball(1.0), H, lambda x, y: 0.5 * (A[0, 0] * x * x + 2 * A[0, 1] * x * y + A[1, 1] * y * y) + b[0] * x + b[1] * y)
    X = fld.interior_points()
    G = X @ A + b
    P = PValue.parse(p)
    exact = np.array([eval_normalized(P, Jet(g, A)) for g in G])
    m = bulk(fld) & (np.hypot(G[:, 0], G[:, 1]) > 0.5)
    assert np.max(np.abs(discrete_operator_field(P, fld)[m] - exact[m])) < 0.01


def test_discrete_operator_single_node():
    fld = sample_field(ball(1.0), H, u_ball(1.0))
    i, j = fld.nodes[100]
    assert discrete_operator(2, fld, (i, j)) == pytest.approx(-1.0, abs=1e-9)
    with pytest.raises(ValueError):
        discrete_operator(2, fld, (0, 0))


@pytest.mark.parametrize("p", ["1.2", "1.5", "2", "3", "inf"])
@pytest.mark.parametrize("seed", range(3))
def test_frozen_scheme_is_an_m_matrix(p, seed):
    # monotonicity: off-diagonal weights >= 0, rows diagonally dominant
    fld = make_grid(ellipse(0.6, 0.9), 1 / 24)
    u = np.random.default_rng(seed).normal(size=fld.n_interior)
    A, _ = linearize(PValue.parse(p), fld, u)
    A = sp.csr_matrix(A)
    d = A.diagonal()
    off = A - sp.diags(d)
    assert off.min() >= -1e-12 * abs(d).max()
    assert np.all(d < 0)
    assert np.all(np.asarray(A.sum(axis=1)).ravel() <= 1e-9 * abs(d))


def test_grid_classification():
    fld = make_grid(ball(1.0), 1 / 16)
    X = fld.interior_points()
    assert np.all(np.hypot(X[:, 0], X[:, 1]) < 1.0)
    kinds = fld.kind[fld.nodes[:, 0], fld.nodes[:, 1]]
    assert set(np.unique(kinds)) <= {INTERIOR, BOUNDARY_ADJACENT}
    assert np.all((kinds == BOUNDARY_ADJACENT) == np.any(fld.nbr < 0, axis=1))
    assert np.all((fld.theta > 0) & (fld.theta <= 1))


# --- Dirichlet solves ----------------------------------------------------------------

def test_ball_p2_error():
    fld, rep = solve_dirichlet(ball(1.0), 2, h=H)
    X = fld.interior_points()
    assert rep.converged and rep.final_residual <= 1e-8
    assert np.max(np.abs(fld.interior_values - u_ball(1.0)(X[:, 0], X[:, 1]))) <= 0.01


def test_ball_infinity_center_value():
    fld, rep = solve_dirichlet(ball(1.0), INF, h=H)
    assert rep.converged
    assert fld.interpolate(0.0, 0.0) == pytest.approx(0.5, abs=0.02)


def test_ellipse_p3_positive_and_converged():
    fld, rep = solved_ellipse("3")
    assert rep.converged and np.all(fld.interior_values > 0)
    assert rep.existence_guard.startswith("guaranteed")


def test_p2_second_order_on_a_smooth_non_polynomial_solution():
    # u = x⁴ + y⁴: Δ_2^N u = 6 (x² + y²), Dirichlet data from u itself
    exact = lambda x, y: x**4 + y**4
    errs = []
    for h in (1 / 16, 1 / 32, 1 / 64):
        fld, rep = solve_dirichlet(ball(1.0), 2, f=lambda x, y: -6 * (x * x + y * y), g=exact, h=h, tol=1e-11)
        X = fld.interior_points()
        errs.append(np.max(np.abs(fld.interior_values - exact(X[:, 0], X[:, 1]))))
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0


def test_jacobi_agrees_with_policy_iteration():
    d = ball(1.0)
    u1, r1 = solve_dirichlet(d, 3, h=1 / 16, tol=1e-10, method="jacobi")
    u2, r2 = solve_dirichlet(d, 3, h=1 / 16, tol=1e-10)
    assert r1.method == "jacobi" and r1.tau == pytest.approx(0.2 / 256)
    assert np.max(np.abs(u1.interior_values - u2.interior_values)) < 1e-6


@pytest.mark.parametrize("p", ["1.5", "5", "inf"])
@pytest.mark.parametrize("d", [ball(1.12), ball(0.9, center=(0.12, 0.0), xbar=(0.0, 0.0)), ellipse(0.88, 1.23)])
def test_non_constant_source_converges(p, d):
    # cases where max/min ties at the boundary once made the iteration cycle
    f = lambda x, y: 1.2 + 0.3 * np.sin(3 * x) * np.cos(3 * y) + 0.2 * (x * x + y * y)
    _, rep = solve_dirichlet(d, PValue.parse(p), f=f, h=1 / 32, tol=1e-11)
    assert rep.converged and rep.iterations < 40


def test_non_convergence_is_reported_not_raised():
    fld, rep = solve_dirichlet(ball(1.0), 3, h=1 / 16, method="jacobi", max_iter=3)
    assert not rep.converged and rep.iterations == 3


@pytest.mark.parametrize("p", [1.0, 1])
def test_p_one_is_unsupported(p):
    with pytest.raises(UnsupportedExponentError):
        solve_dirichlet(ball(1.0), p, h=H)


def test_too_coarse_grid():
    with pytest.raises(InsufficientResolutionError):
        solve_dirichlet(ball(1.0), 2, h=0.5)


def test_bad_arguments():
    with pytest.raises(ValueError):
        solve_dirichlet(ball(1.0), 2, h=1 / 16, tol=0.0)
    with pytest.raises(ValueError):
        solve_dirichlet(ball(1.0), 2, h=1 / 16, method="gauss")


def test_report_json_is_deterministic():
    a = solve_dirichlet(ellipse(0.8, 1.2), 3, h=1 / 32)
    b = solve_dirichlet(ellipse(0.8, 1.2), 3, h=1 / 32)
    assert np.array_equal(a[0].values, b[0].values, equal_nan=True)
    ja, jb = a[1].to_json_dict(), b[1].to_json_dict()
    assert json.dumps(ja) == json.dumps(jb)
    assert {"iterations", "residual", "converged", "p", "h", "existence_guard"} <= set(ja)


@pytest.mark.parametrize(
    "p, f, expected",
    [
        (3, 1.0, "guaranteed: p > n with one-signed f"),
        (INF, 1.0, "guaranteed: p = inf with bounded f"),
        (2, 1.0, "not guaranteed"),
        (3, lambda x, y: x, "not guaranteed"),
        (1.5, 1.0, "not guaranteed"),
    ],
)
def test_existence_guard(p, f, expected):
    fld = make_grid(ball(1.0), 1 / 16)
    func = f if callable(f) else (lambda x, y, v=f: np.full(np.shape(x), v))
    assert existence_guard(p, 2, func, fld) == expected


# --- comparison, positivity, Hopf --------------------------------------------------------

@pytest.mark.parametrize("p", ["1.5", "3", "inf"])
def test_larger_source_gives_larger_solution(p):
    d = ellipse(0.7, 1.0)
    u1, _ = solve_dirichlet(d, PValue.parse(p), f=1.0, h=1 / 32, tol=1e-11)
    u2, _ = solve_dirichlet(d, PValue.parse(p), f=lambda x, y: 1.5 + x * x, h=1 / 32, tol=1e-11)
    assert np.all(u1.interior_values <= u2.interior_values + 1e-9)


@pytest.mark.parametrize("p", ["2", "inf"])
def test_raising_boundary_data_never_lowers_solution(p):
    d = ball(1.0)
    u1, _ = solve_dirichlet(d, PValue.parse(p), g=lambda x, y: 0.1 * x, h=1 / 32, tol=1e-11)
    u2, _ = solve_dirichlet(d, PValue.parse(p), g=lambda x, y: 0.1 * x + 0.2 + 0.1 * y * y, h=1 / 32, tol=1e-11)
    assert np.all(u1.interior_values <= u2.interior_values + 1e-9)


def test_hopf_sign_on_the_ellipse():
    fld, _ = solved_ellipse("3")
    for bp in boundary_sample(ellipse(0.8, 1.2), 64):
        assert boundary_normal_derivative(fld, bp) > 0


# --- boundary derivative ------------------------------------------------------------------

@pytest.mark.parametrize("p, R", [("2", 1.0), ("inf", 2.0), ("3", 1.5)])
def test_boundary_derivative_of_sampled_radial_field(p, R):
    cp = c_p(PValue.parse(p), 2)
    fld = sample_field(ball(R), H, u_ball(cp, R))
    for bp in boundary_sample(ball(R), 32):
        assert boundary_normal_derivative(fld, bp) == pytest.approx(cp * R, rel=0.05)


def test_boundary_derivative_of_linear_field_is_exact():
    fld = sample_field(ball(1.0), H, lambda x, y: 1.0 - x + 0 * y)
    bp = BoundaryPoint(np.array([1.0, 0.0]), np.array([1.0, 0.0]), 1.0, 0.0)
    assert boundary_normal_derivative(fld, bp) == pytest.approx(1.0, abs=1e-12)


def test_boundary_derivative_outside_grid():
    fld = make_grid(ball(1.0), 1 / 16)
    bp = BoundaryPoint(np.array([5.0, 0.0]), np.array([1.0, 0.0]), 1.0, 0.0)
    with pytest.raises(InsufficientResolutionError):
        boundary_normal_derivative(fld, bp)
