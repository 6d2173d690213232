import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from lawsonleaf.exterior import (
    Chart,
    ChartMap,
    DifferentialForm,
    ScalarField,
    StructureError,
    TangentVector,
    evaluate,
    exterior_derivative,
    finite_difference,
    form_discrepancy,
    interior,
    pfaffian4,
    pullback,
    wedge,
)
from lawsonleaf.exterior import dual as D

R3 = Chart("R3", ("x", "y", "z"))
R4 = Chart("R4", ("a", "b", "c", "d"))

finite = st.floats(-2.0, 2.0, allow_nan=False)


def _field(chart, fn):
    return ScalarField(chart, fn)


def _sample_form(chart):
    """A non-constant 1-form with transcendental coefficients."""
    f = _field(chart, lambda p: D.sin(p[0]) * p[1] + D.exp(0.3 * p[2]))
    g = _field(chart, lambda p: p[0] * p[0] * p[2] - D.cos(p[1]))
    return chart.d(0) * f + chart.d(2) * g


# --- dual numbers ----------------------------------------------------------------


@given(finite)
def test_dual_matches_finite_difference(x):
    fn = lambda t: D.exp(D.sin(t)) * t**3 / (2.0 + D.cos(t))
    tag = D.new_tag()
    exact = D.infinitesimal(fn(D.Dual(x, 1.0, tag)), tag)
    h = 1e-6
    fd = (fn(x + h) - fn(x - h)) / (2 * h)
    assert abs(exact - fd) < 1e-6 * max(1.0, abs(fd))


@given(finite)
def test_nested_duals_give_second_derivative(x):
    t1, t2 = D.new_tag(), D.new_tag()
    y = D.Dual(D.Dual(x, 1.0, t1), 1.0, t2)
    val = D.sin(y) * y
    second = D.infinitesimal(D.infinitesimal(val, t2), t1)
    assert second == pytest.approx(2 * math.cos(x) - x * math.sin(x), abs=1e-12)


def test_step_limits_and_symmetry():
    t = np.linspace(-0.5, 1.5, 2001)
    s = D.step(t)
    assert np.all(s[t <= 0] == 0.0) and np.all(s[t >= 1] == 1.0)
    assert np.all(np.diff(s) >= 0)
    inner = t[(t > 0) & (t < 1)]
    assert np.max(np.abs(D.step(inner) + D.step(1 - inner) - 1)) < 1e-15
    assert np.max(np.abs(D.step(inner) - oracles.step(inner))) < 1e-14


def test_step_prime_against_finite_difference():
    t = np.linspace(0.02, 0.98, 97)
    assert np.max(np.abs(D.step_prime(t) - oracles.step_prime_fd(t))) < 1e-7
    tag = D.new_tag()
    via_dual = D.infinitesimal(D.step(D.Dual(t, 1.0, tag)), tag)
    assert np.array_equal(via_dual, D.step_prime(t))


def test_step_prime_positive_near_ends():
    # no cancellation: 1 - s is recomputed, not subtracted
    t = np.array([1e-3, 0.02, 0.98, 1 - 1e-2])
    assert np.all(D.step_prime(t) > 0)


# --- forms -----------------------------------------------------------------------


def test_d_squared_vanishes():
    a = _sample_form(R3)
    dd = exterior_derivative(exterior_derivative(a))
    pts = tuple(np.random.default_rng(1).uniform(-2, 2, 200) for _ in range(3))
    for c in dd.coeffs.values():
        assert np.max(np.abs(c(pts))) < 1e-12


def test_d_of_function_matches_finite_difference():
    f = _field(R3, lambda p: D.exp(p[0]) * D.sin(p[1] * p[2]))
    df = exterior_derivative(DifferentialForm.function(f))
    p = (0.3, -0.7, 1.1)
    for i in range(3):
        assert float(df.coefficient((i,))(p)) == pytest.approx(finite_difference(f, p, i), rel=1e-8)


@settings(max_examples=30)
@given(st.lists(finite, min_size=3, max_size=3))
def test_leibniz_rule(p):
    a = _sample_form(R3)
    b = R3.d(1) * _field(R3, lambda q: q[0] * q[2])
    lhs = exterior_derivative(wedge(a, b))
    rhs = wedge(exterior_derivative(a), b) - wedge(a, exterior_derivative(b))
    assert form_discrepancy(lhs, rhs, tuple(p)) < 1e-12


def test_wedge_graded_commutativity():
    a, b = R4.d(0) + R4.d(1) * 2.0, R4.d(2) - R4.d(3)
    ab, ba = wedge(a, b), wedge(b, a)
    assert form_discrepancy(ab, -ba, (0.0,) * 4) == 0.0
    two = wedge(R4.d(0), R4.d(1))
    assert form_discrepancy(wedge(two, R4.d(2)), wedge(R4.d(2), two), (0.0,) * 4) == 0.0
    assert not wedge(a, a).coeffs


def test_pullback_commutes_with_d():
    phi = ChartMap.from_function(R3, R3, lambda p: (p[0] * p[1], D.sin(p[2]), p[0] + p[2] ** 2), "phi")
    a = _sample_form(R3)
    pts = tuple(np.random.default_rng(2).uniform(-1, 1, 100) for _ in range(3))
    assert form_discrepancy(pullback(phi, exterior_derivative(a)), exterior_derivative(pullback(phi, a)), pts) < 1e-11


def test_interior_and_evaluate_agree():
    a = wedge(_sample_form(R3), R3.d(1))
    X = [R3.coordinate(1), ScalarField.constant(R3, 1.0), R3.coordinate(0)]
    p = (0.4, 0.2, -0.9)
    v = [float(c(p)) for c in X]
    w = [0.3, -1.0, 2.0]
    lhs = interior(X, a).at(p, [w])
    rhs = evaluate(a, [TangentVector(R3, p, v), TangentVector(R3, p, w)])
    assert float(lhs) == pytest.approx(float(rhs), rel=1e-13)


def test_pfaffian_of_standard_form():
    omega = wedge(R4.d(0), R4.d(1)) * 3.0 + wedge(R4.d(2), R4.d(3)) * -2.0
    frame = [R4.basis(i) for i in range(4)]
    pf = pfaffian4(omega, (0.0,) * 4, frame)
    assert pf == pytest.approx(-6.0)
    B = [[float(omega.at((0,) * 4, [u, v])) for v in frame] for u in frame]
    assert abs(pf) == pytest.approx(oracles.pfaffian_via_det(B))


def test_structure_errors():
    other = Chart("other", ("x", "y", "z"))
    with pytest.raises(StructureError):
        R3.d(0) + other.d(0)
    with pytest.raises(StructureError):
        TangentVector(R3, (0, 0), (1, 0, 0))
    with pytest.raises(StructureError):
        DifferentialForm(R3, 2, {(1, 0): ScalarField.constant(R3, 1.0)})
    with pytest.raises(StructureError):
        Chart("dup", ("x", "x"))
