import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from normplap.geometry import ball, ellipse
from normplap.operators import Jet, PValue, c_p
from normplap.profiles import ProfileDomainError, QProfile
from normplap.viscosity import (
    Candidate,
    JetMismatchError,
    NBall,
    check_degenerate_relation,
    check_interior,
    check_neumann,
    constant_candidate,
    level_mean_curvature,
    linear_candidate,
    radial_candidate,
    sample_points,
    spot_check_jet,
)

INF = PValue.inf()
PS = [1, 1.5, 2, 3, 10, INF]


def quadratic_candidate(A, b):
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + A.T)
    b = np.asarray(b, dtype=float)
    return Candidate(lambda x: float(0.5 * x @ A @ x + b @ x), lambda x: Jet(A @ x + b, A), len(b), None, "quadratic")


@pytest.mark.parametrize("p", PS)
@pytest.mark.parametrize("n", [2, 3])
def test_radial_candidate_is_a_solution(p, n):
    c = radial_candidate(p, n, R=1.2)
    pts = sample_points(NBall(1.2, n), count=300) if n == 3 else sample_points(ball(1.2), count=300)
    rep = check_interior(c, p, 1.0, pts, "solution")
    assert rep.passed and rep.checked == len(pts)
    assert abs(rep.worst_residual) < 1e-9


def test_zero_is_a_subsolution_but_not_a_supersolution():
    pts = sample_points(ball(1.0), count=200)
    zero = constant_candidate(0.0)
    assert check_interior(zero, 3, 1.0, pts, "sub").passed
    sup = check_interior(zero, 3, 1.0, pts, "super")
    assert len(sup.violations) == len(pts)
    assert all(v["residual"] == pytest.approx(1.0) for v in sup.violations)


def test_unknown_mode():
    with pytest.raises(ValueError):
        check_interior(constant_candidate(), 2, 1.0, [[0.0, 0.0]], "both")


def test_point_outside_smoothness_region():
    with pytest.raises(ValueError):
        check_interior(radial_candidate(2, R=1.0), 2, 1.0, [[2.0, 0.0]])


@given(
    st.sampled_from(PS),
    st.lists(st.floats(-3, 3), min_size=4, max_size=4),
    st.lists(st.floats(-1, 1), min_size=2, max_size=2),
    st.floats(-2, 2),
)
def test_negation_duality(p, A, b, f):
    c = quadratic_candidate(np.reshape(A, (2, 2)), b)
    pts = sample_points(ball(1.0), count=40, include_touching=False)
    sub = check_interior(c, p, f, pts, "sub")
    sup = check_interior(c.negated(), p, -f, pts, "super")
    assert sub.passed == sup.passed
    assert [v["point"] for v in sub.violations] == [v["point"] for v in sup.violations]


def test_spot_check_catches_wrong_jet():
    good = quadratic_candidate([[1.0, 0.5], [0.5, -2.0]], [0.3, 0.0])
    pts = sample_points(ball(1.0), count=100, include_touching=False)
    assert spot_check_jet(good, pts) < 1e-6
    bad = Candidate(good.value, lambda x: Jet(good.jet(x).gradient, np.eye(2)), 2)
    with pytest.raises(JetMismatchError):
        spot_check_jet(bad, pts)


def test_sample_points_are_deterministic_and_inside():
    d = ellipse(0.8, 1.2)
    a, b = sample_points(d, 500), sample_points(d, 500)
    assert np.array_equal(a, b)
    assert len(a) == 500 + 3
    assert np.all(d.level(a[:, 0], a[:, 1]) < 0)
    assert a[0] == pytest.approx(d.xbar)


# --- Neumann --------------------------------------------------------------------------

@pytest.mark.parametrize("p", PS)
def test_neumann_of_radial_candidate(p):
    cp = c_p(p, 2)
    d = ball(1.5)
    rep = check_neumann(radial_candidate(p, 2, 1.5), d, QProfile.radial(lambda r: cp * r), p)
    assert rep.passed and rep.max_abs_residual < 1e-12
    rep1 = check_neumann(radial_candidate(p, 2, 1.5), d, QProfile.radial(lambda r: cp * r + 1.0), p)
    assert all(e["residual"] == pytest.approx(-1.0) for e in rep1.residuals)


def test_neumann_barrier_flags_q_below_inner_ball_slope():
    d = ellipse(0.8, 1.2)
    # q(r) = r/2 sits below the inscribed barrier slope c_p R1 at P1
    rep = check_neumann(radial_candidate(INF, 2, 1.2), d, QProfile.radial(lambda r: r / 2), INF)
    assert not rep.barrier["inner_holds"] and rep.barrier["outer_holds"]


def test_neumann_profile_domain_error():
    q = QProfile.from_table([0.0, 0.9], [0.0, 0.9])
    with pytest.raises(ProfileDomainError):
        check_neumann(radial_candidate(2, 2, 1.0), ball(1.0), q, 2)


# --- degenerate relation ------------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 3])
def test_degenerate_relation_for_radial_one_laplacian(n):
    d = ball(1.0) if n == 2 else NBall(1.0, 3)
    rep = check_degenerate_relation(radial_candidate(1, n, 1.0), d, band=0.2)
    assert rep.passed and rep.worst_residual < 1e-6
    assert rep.min_boundary_curvature == pytest.approx(1.0)


def test_degenerate_relation_rejects_flat_candidate():
    rep = check_degenerate_relation(linear_candidate([-1.0, 0.0], 1.0), ball(1.0), band=0.2)
    assert not rep.passed
    assert any(v["kind"] == "nonpositive_curvature" for v in rep.violations)


def test_degenerate_relation_reports_vanishing_gradient():
    rep = check_degenerate_relation(constant_candidate(1.0), ball(1.0), band=0.1)
    assert not rep.passed and rep.precondition_violations


@given(st.floats(0.1, 5.0), st.sampled_from([2, 3]))
def test_level_curvature_of_spheres(r, n):
    # u = -|x|²/2: level spheres of radius r have mean curvature 1/r
    x = np.zeros(n)
    x[0] = r
    assert level_mean_curvature(Jet(-x, -np.eye(n))) == pytest.approx(1.0 / r)
