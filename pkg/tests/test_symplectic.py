import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from lawsonleaf import milnor as MI
from lawsonleaf import symplectic as SY
from lawsonleaf.exterior import exterior_derivative
from lawsonleaf.milnor import E6, E7, E8, AmbientPoint

POLYS = [E6, E7, E8]


def test_liouville_contraction_and_growth():
    rep = SY.liouville_identity_check(1000)
    assert rep.passed and rep.max_residual < 1e-12
    # X . rhobar at rhobar = 4
    Z = np.array([2.0, 0.0, 0.0], complex)
    X = SY.liouville_field(AmbientPoint(Z))
    grad = [2 * c for c in X.base]
    assert sum(g * v for g, v in zip(grad, X.components)) == pytest.approx(4.0)


def test_liouville_rejects_origin():
    with pytest.raises(ValueError):
        SY.liouville_field(np.zeros(3, complex))


def test_ambient_forms_against_oracle():
    beta, lam = SY.ambient_forms()
    rng = np.random.default_rng(0)
    z = rng.standard_normal((50, 3)) + 1j * rng.standard_normal((50, 3))
    u = rng.standard_normal((50, 3)) + 1j * rng.standard_normal((50, 3))
    v = rng.standard_normal((50, 3)) + 1j * rng.standard_normal((50, 3))
    got = np.asarray(beta.at(SY.to_reals(z), [SY.to_reals(u), SY.to_reals(v)]))
    assert np.max(np.abs(got - oracles.beta_star(u, v))) < 1e-12
    got = np.asarray(lam.at(SY.to_reals(z), [SY.to_reals(u)]))
    assert np.max(np.abs(got - oracles.lambda_star(z, u))) < 1e-12


def test_lambda_star_is_rhobar_zeta():
    # on the unit sphere lambda* = zeta, the Hopf contact form; at radius r it scales by r^2
    _, lam = SY.ambient_forms()
    P = MI.sample_link_array(E6, 20, 1)
    hopf = 1j * P  # generator of the Hopf flow
    for r in (1.0, 3.0):
        val = np.asarray(lam.at(SY.to_reals(r * P), [SY.to_reals(r * hopf)]))
        assert np.max(np.abs(val - r**2)) < 1e-12


def test_restrict_to_fiber_positive_at_reference_point():
    beta, lam = SY.ambient_forms()
    fr = SY.fiber_frame(E6, np.array([1.0, 0.0, 0.0], complex))
    M = SY.restrict_to_fiber(beta, fr)
    pf = M[0, 1] * M[2, 3] - M[0, 2] * M[1, 3] + M[0, 3] * M[1, 2]
    assert pf > 0 and pf == pytest.approx(oracles.pfaffian_via_det(M))
    dM = SY.restrict_to_fiber(exterior_derivative(lam), fr)
    assert np.max(np.abs(dM - M)) < 1e-10


def test_invalid_frame_rejected():
    beta, _ = SY.ambient_forms()
    fr = SY.fiber_frame(E6, np.array([1.0, 0.0, 0.0], complex))
    bad = SY.FiberFrame(E6, fr.base, (SY.to_reals(np.array([1.0, 0, 0], complex)),) + fr.vectors[1:])
    bad = SY.FiberFrame(E6, fr.base, tuple(tuple(float(c) for c in v) for v in bad.vectors))
    with pytest.raises(SY.FrameError):
        SY.restrict_to_fiber(beta, bad)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(POLYS), st.complex_numbers(min_magnitude=0.05, max_magnitude=5), st.integers(0, 1000))
def test_fibre_pfaffian_positive(f, w, seed):
    rng = np.random.default_rng(seed)
    Z = MI.newton_project(f, rng.standard_normal((20, 3)) + 1j * rng.standard_normal((20, 3)), w)
    u1, u2 = SY.kernel_basis(f.gradient(Z))
    beta, _ = SY.ambient_forms()
    pf = SY.restricted_pfaffian(beta, SY.to_reals(Z), SY.real_frame(u1, u2))
    assert np.all(pf > 0)
    assert np.max(np.abs(pf - 4.0)) < 1e-10  # unitary frame: Pf = 2^2


def test_frame_is_deterministic_and_orthonormal():
    Z = MI.newton_project(E7, np.array([[1.0 + 0.2j, 0.5, -0.3j]]), 1.0)
    a = SY.fiber_frame(E7, Z[0])
    b = SY.fiber_frame(E7, Z[0])
    assert a.vectors == b.vectors
    a.validate()


def test_symplectization_identity_at_unit_varrho():
    P = SY.points_on_level(E6, math.e**4, 10, 0)
    out = SY.symplectization_error(E6, P, 1.0, 1e-3)
    assert out["lambda_rel_error"] == 0.0


def test_symplectization_e6():
    rep = SY.symplectization_identification(E6, math.e**4, 30)
    assert rep.passed
    assert rep.details["field_rel_error"] < 1e-6
    assert all(r >= 8 for r in rep.details["order_ratios"])


def test_symplectization_requires_level_above_one():
    with pytest.raises(ValueError):
        SY.symplectization_identification(E6, 0.5, 5)


def test_points_on_level():
    P = SY.points_on_level(E8, 20.0, 30, 2)
    assert np.max(np.abs(np.sum(np.abs(P) ** 2, axis=1) - 20.0)) < 1e-10
    assert np.max(np.abs(E8(P) - 1)) < 1e-9


def test_reembedding_pieces_and_positivity():
    e1, rep = SY.reembedding_form(E6, 8.0, 1000)
    assert rep.passed and rep.details["min_pfaffian"] > 0
    Q = MI.sample_cone_band(E6, 200, 5)
    rad = np.asarray(MI.weighted_radius(E6, Q))
    inner, outer = rad <= 2.0, rad >= 3.0
    G = e1.graph(Q)
    # psi = 1: the graph is the rescaled F_1(R); psi = 0: it is F_0(1)
    assert np.max(np.abs(E6(G[inner]) - 8.0**-3)) < 1e-12
    assert np.array_equal(G[outer], Q[outer])


def test_reembedding_certifies_small_radius_for_all():
    for f in POLYS:
        e1, rep = SY.certify_reembedding(f, samples=300)
        assert e1 is not None and rep.details["R"] <= 32


def test_reembedding_rejects_small_R():
    with pytest.raises(ValueError):
        SY.reembedding_form(E6, 1.2, 100)


def test_pushforward_matches_finite_difference():
    e1 = SY.Reembedding(E6, 4.0)
    Q = MI.sample_cone_band(E6, 5, 1)
    V = np.array([[0.3, -0.2j, 0.1]] * 5)
    _, dv = SY.pushforward(e1.graph, Q, V)
    h = 1e-6
    fd = (e1.graph(Q + h * V) - e1.graph(Q - h * V)) / (2 * h)
    assert np.max(np.abs(dv - fd)) < 1e-6


@pytest.mark.parametrize("f", POLYS, ids=lambda f: f.name)
def test_contact_closeness_decreases(f):
    rep = SY.contact_closeness(f, samples=50)
    assert rep.passed


# --- injected faults -------------------------------------------------------------


def test_fault_liouville(monkeypatch):
    clean = SY.liouville_vector_field
    monkeypatch.setattr(SY, "liouville_vector_field", lambda: [c * (1 + 1e-6) for c in clean()])
    assert not SY.liouville_identity_check(200).passed


def test_fault_symplectization(monkeypatch):
    clean = SY.fiber_liouville
    monkeypatch.setattr(SY, "fiber_liouville", lambda f, Z: clean(f, Z) * (1 + 3e-6))
    assert not SY.symplectization_identification(E6, math.e**4, 10).passed


def test_fault_reembedding(monkeypatch):
    clean = SY.Reembedding.graph
    monkeypatch.setattr(SY.Reembedding, "graph", lambda self, Q: clean(self, Q) + 1e-6)
    _, rep = SY.reembedding_form(E6, 8.0, 300)
    assert not rep.passed


def test_fault_contact_closeness(monkeypatch):
    clean = SY.end_to_ambient_array
    # a defect that grows with the level instead of decaying
    monkeypatch.setattr(
        SY, "end_to_ambient_array", lambda f, Z, tau, th, **kw: clean(f, Z, tau, th, **kw) * (1 + 1e-6 * tau**2)
    )
    rep = SY.contact_closeness(E6, samples=50)
    assert not rep.passed and not rep.details["flag_decreasing"]
