import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from normplap.operators import PValue, c_p, eval_normalized
from normplap.radial import (
    RadialSolution,
    radial_jet,
    radial_neumann,
    radial_value,
    verify_radial_is_solution,
)

INF = PValue.inf()
PS = [1, 1.5, 2, 3, 7, 10, INF]


@pytest.mark.parametrize(
    "p, n, R, x, expected",
    [
        (2, 2, 1.0, (0.0, 0.0), 0.5),
        (INF, 2, 2.0, (2.0, 0.0), 0.0),
        (INF, 3, 2.0, (0.0, 0.0, -2.0), 0.0),
        (1, 3, 2.0, (0.0, 0.0, 0.0), 1.0),
    ],
)
def test_radial_value_examples(p, n, R, x, expected):
    assert radial_value(RadialSolution(p, n, R), x) == pytest.approx(expected, abs=1e-15)


def test_radial_value_is_vectorized_and_negative_outside():
    s = RadialSolution(3, 2, 1.0, center=(0.5, -0.5))
    pts = np.array([[0.5, -0.5], [1.5, -0.5], [2.5, -0.5]])
    v = radial_value(s, pts)
    assert v[0] == pytest.approx(s.cp / 2) and v[1] == 0.0 and v[2] < 0


def test_radial_jet_examples():
    j = radial_jet(RadialSolution(1, 3, 1.0), (1.0, 0.0, 0.0))
    assert j.gradient == pytest.approx([-0.5, 0.0, 0.0])
    assert j.hessian == pytest.approx(-0.5 * np.eye(3))
    assert np.all(radial_jet(RadialSolution(5, 2, 1.0), (0.0, 0.0)).gradient == 0.0)
    assert radial_jet(RadialSolution(INF, 2, 1.0), (0.0, 1.0)).gradient == pytest.approx([0.0, -1.0])


@pytest.mark.parametrize("p, n, R, expected", [(INF, 2, 3.0, 3.0), (2, 2, 1.0, 1.0), (1, 3, 2.0, 1.0)])
def test_radial_neumann_examples(p, n, R, expected):
    assert radial_neumann(p, n, R) == expected


def test_radial_neumann_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        radial_neumann(2, 2, 0.0)


@pytest.mark.parametrize("p", PS)
@pytest.mark.parametrize("n", [2, 3])
def test_verify_radial(p, n):
    rep = verify_radial_is_solution(RadialSolution(p, n, 1.3), samples=200)
    assert rep.passed and rep.worst_deviation < 1e-10
    assert rep.center_upper == pytest.approx(-1.0, abs=1e-10)


def test_verify_radial_needs_samples():
    with pytest.raises(ValueError):
        verify_radial_is_solution(RadialSolution(2, 2, 1.0), samples=50)


@given(st.sampled_from(PS), st.sampled_from([2, 3]), st.floats(0.1, 10.0), st.floats(0, 2 * math.pi))
def test_jet_derivative_matches_neumann(p, n, R, t):
    s = RadialSolution(p, n, R)
    nu = np.zeros(n)
    nu[0], nu[1] = math.cos(t), math.sin(t)
    j = radial_jet(s, R * nu)
    assert -float(j.gradient @ nu) == pytest.approx(radial_neumann(p, n, R), rel=1e-14)


@given(st.sampled_from(PS), st.sampled_from([2, 3]), st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0, 5))
def test_larger_ball_gives_larger_solution(p, n, R1, R2, r):
    R1, R2 = sorted((R1, R2))
    x = np.zeros(n)
    x[0] = r
    assert radial_value(RadialSolution(p, n, R1), x) <= radial_value(RadialSolution(p, n, R2), x)


@given(st.floats(1, 100), st.floats(1, 100), st.sampled_from([2, 3]), st.floats(0, 2))
def test_radial_scales_by_c_p_ratio(p, q, n, r):
    x = np.zeros(n)
    x[0] = r
    up = radial_value(RadialSolution(p, n, 2.0), x)
    uq = radial_value(RadialSolution(q, n, 2.0), x)
    assert up == pytest.approx(uq * c_p(p, n) / c_p(q, n), rel=1e-12, abs=1e-15)


@given(st.sampled_from(PS), st.floats(0.01, 0.99))
def test_strictly_decreasing_in_radius(p, r):
    s = RadialSolution(p, 2, 1.0)
    assert radial_value(s, (r, 0.0)) > radial_value(s, (r + 0.01, 0.0))


def test_value_and_jet_agree_with_finite_differences():
    s = RadialSolution(3, 2, 1.0, center=(0.1, 0.2))
    x = np.array([0.4, -0.3])
    h = 1e-6
    g = [(radial_value(s, x + h * e) - radial_value(s, x - h * e)) / (2 * h) for e in np.eye(2)]
    assert radial_jet(s, x).gradient == pytest.approx(g, rel=1e-8)
    assert eval_normalized(3, radial_jet(s, x)) == pytest.approx(-1.0)


@pytest.mark.parametrize("kw", [dict(n=1), dict(R=0.0), dict(R=-1.0), dict(center=(0.0,))])
def test_radial_solution_validation(kw):
    args = dict(p=2, n=2, R=1.0) | kw
    with pytest.raises(ValueError):
        RadialSolution(**args)
