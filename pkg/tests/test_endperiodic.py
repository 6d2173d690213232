import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from lawsonleaf import endperiodic as EP
from lawsonleaf.exterior import form_discrepancy, wedge
from lawsonleaf.milnor import E6, E7, E8
from lawsonleaf.nil import NilChart

T = (0.0, 1.0, 2.0, 3.0)


@pytest.fixture(scope="module")
def pair():
    return EP.build_cutoffs(0.05, T)


def test_cutoff_reference_values(pair):
    p = (0.5, 0.0, 0.0, 0.0)
    assert float(pair.k(p)) == pytest.approx(math.exp(0.5), rel=1e-14)
    assert float(pair.l(p)) == 0.0
    assert float(pair.k((3.5, 0, 0, 0))) == 0.0 and float(pair.l((3.5, 0, 0, 0))) == pair.lam
    assert pair.Ts == -1.0
    # frozen from the grid oracle: lam = 1.05 * bound, bound attained near tau = 2.48
    assert pair.lam == pytest.approx(1.05 * pair.bound_max, rel=1e-15)
    assert pair.bound_max == pytest.approx(oracles.lambda_bound(0.05, 2.0, 3.0), rel=1e-6)
    assert pair.bound_argmax == pytest.approx(2.476, abs=1e-3)
    assert pair.link_bound_max < pair.bound_max


def test_k_matches_oracle(pair):
    ts = np.linspace(-1.0, 6.0, 701)
    p = (ts, 0.0, 0.0, 0.0)
    assert np.max(np.abs(np.asarray(pair.k(p)) - oracles.k_cut(ts, 2.0, 3.0))) < 1e-12
    inner = ts[(ts > 2.01) & (ts < 2.99)]
    assert np.max(np.abs(np.asarray(pair.k_prime(inner)) - oracles.k_cut_prime(inner, 2.0, 3.0))) < 1e-6


@pytest.mark.parametrize("mu", [0.0, -1.0])
def test_nonpositive_mu_rejected(mu):
    with pytest.raises(EP.ConstructionError):
        EP.build_cutoffs(mu, T)


def test_breakpoints_must_increase():
    with pytest.raises(EP.ConstructionError, match="T0 < T1 < T2 < T3"):
        EP.build_cutoffs(0.05, (0.0, 2.0, 1.0, 3.0))


def test_positive_c1_rejected():
    with pytest.raises(EP.ConstructionError):
        EP.build_cutoffs(0.05, T, NilChart(3))


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 5.0))
def test_doubling_mu_keeps_margin(mu):
    a = EP.build_cutoffs(mu, T, grid=2000)
    b = EP.build_cutoffs(2 * mu, T, grid=2000)
    assert b.margin >= a.margin - 1e-12
    assert a.margin >= 0.05 / 1.05 - 1e-12


def test_invariant_violation_is_named(pair):
    import dataclasses

    bad = dataclasses.replace(pair, lam=pair.bound_max * 0.99)
    with pytest.raises(EP.ConstructionError, match="l = lam|exceed"):
        EP.check_cutoff_invariants(bad, 500)


def test_end_form_far_region(pair):
    ch = pair.chart
    beta = EP.end_form(pair)
    zeta = EP.end_zeta(ch, pair.nil)
    ref = wedge(ch.d("tau"), ch.d("x")) * pair.lam + wedge(ch.d("y"), zeta) * pair.mu
    pts = (np.full(20, 4.0), *np.random.default_rng(0).uniform(-5, 5, (3, 20)))
    assert form_discrepancy(beta, ref, pts) < 1e-12


def test_end_form_at_T0(pair):
    # k = e^tau, l = 0: beta' = e^tau dtau^zeta + a e^tau dx^dy + mu dy^zeta, a = 9 / 2 pi
    ch = pair.chart
    beta = EP.end_form(pair)
    e = [ch.basis(i) for i in range(4)]
    p = (0.0, 0.3, -0.2, 1.0)
    assert float(beta.at(p, [e[1], e[2]])) == pytest.approx(9 / (2 * math.pi), rel=1e-14)
    assert float(beta.at(p, [e[0], e[3]])) == pytest.approx(1.0, rel=1e-14)
    assert float(beta.at(p, [e[2], e[3]])) == pytest.approx(0.05, rel=1e-14)


def test_end_form_rejects_other_nil(pair):
    with pytest.raises(ValueError):
        EP.end_form(pair, NilChart(-8))


def test_volume_identity(pair):
    rep = EP.volume_identity_check(pair, samples=5000)
    assert rep.passed and rep.max_residual < 1e-9
    assert rep.details["min_coefficient"] > 0


def test_volume_coefficient_against_oracle(pair):
    ts = np.concatenate([np.linspace(lo + 1e-3, hi - 1e-3, 200) for lo, hi in pair.regimes()])
    got = np.asarray(pair.coefficient(ts), float)
    ref = oracles.volume_coefficient(ts, pair.lam, pair.mu, pair.T)
    assert np.max(np.abs(got - ref) / np.maximum(1.0, np.abs(ref))) < 1e-5
    # closed forms: regime [T0, T1] gives 2 a e^{2 tau}; beyond T3 gives 2 lam mu
    a = 9 / (2 * math.pi)
    t = np.linspace(0.0, 1.0, 11)
    assert np.max(np.abs(np.asarray(pair.coefficient(t)) - 2 * a * np.exp(2 * t))) < 1e-12
    assert float(pair.coefficient(5.0)) == pytest.approx(2 * pair.lam * pair.mu, rel=1e-15)


@pytest.mark.parametrize("f", [E6, E7, E8], ids=lambda f: f.name)
def test_volume_identity_for_each_end(f):
    p = EP.build_cutoffs(0.05, T, NilChart(f.end_c1))
    assert EP.volume_identity_check(p, samples=1000).passed


def test_end_invariance(pair):
    assert EP.end_invariance_check(pair, 300).passed


def test_kappa_is_cited():
    rep = EP.kappa_report()
    assert rep.status == "cited"


# --- turbulization ---------------------------------------------------------------


def test_turbulization_field_sign_table():
    m = EP.TurbulizationField().sign_margins()
    assert all(m[k] for k in ("g_zero", "h_one", "g_linear", "h_zero", "g_decreasing", "h_decreasing"))
    assert m["g_prime_margin"] > 0 and m["h_prime_margin"] > 0


def test_turbulization_radii_order():
    with pytest.raises(EP.ConstructionError):
        EP.TurbulizationField(0.02, 0.01, 0.03, 0.05)


def test_flow_stationary_inside_r0():
    field = EP.TurbulizationField()
    r, th = EP.turbulization_flow(field, (0.005, 0.0), 2.0)
    assert r == 0.005 and th == pytest.approx(2.0, rel=1e-14)


def test_flow_closed_form_in_linear_region():
    # on (r2, r*) h = 0 and g = -c r, so r decays exponentially and theta is frozen
    field = EP.TurbulizationField()
    r, th = EP.turbulization_flow(field, (0.045, 0.3), 0.3)
    assert r == pytest.approx(oracles.turbulization_closed_form(0.045, 0.3), abs=1e-8)
    assert th == 0.3


def test_flow_leaves_domain():
    field = EP.TurbulizationField()
    with pytest.raises(EP.DomainError):
        EP.turbulization_flow(field, (0.06, 0.0), 1.0)
    with pytest.raises(EP.DomainError):
        EP.turbulization_flow(field, (0.049, 0.0), -5.0)


def test_c0_frozen_value():
    field = EP.TurbulizationField()
    assert EP.tau2(field, 3) == pytest.approx(-(2 / 3) * math.log(0.03))
    assert EP.frozen_c0(field, 3) == pytest.approx(-2.8211865995901437, abs=1e-15)
    assert EP.measure_c0(field, 3) == pytest.approx(EP.frozen_c0(field, 3), abs=1e-8)


def test_leaf_identification():
    field = EP.TurbulizationField()
    rep = EP.leaf_identification_check(E6, field, EP.frozen_c0(field, 3), 20)
    assert rep.passed and rep.details["arg_residual"] < 1e-6


# --- tameness and gluing ------------------------------------------------------------


def test_tameness_and_end_matching(pair):
    assert EP.end_matching_check(pair, samples=300).passed


def test_gluing_compatibility(pair):
    rep = EP.gluing_compatibility_check(pair, samples=200)
    assert rep.passed and rep.details["branch_spread"] == 0.0


def test_gluing_branches_agree(pair):
    from lawsonleaf.nil import KTChart, kt_symplectic_form
    from lawsonleaf.exterior import pullback

    k = KTChart(pair.nil)
    beta_k = kt_symplectic_form(k, pair.lam, pair.mu)
    c0 = EP.frozen_c0(EP.TurbulizationField())
    pts = (np.full(10, 4.0), *np.random.default_rng(2).uniform(-3, 3, (3, 10)))
    a = pullback(EP.gluing_map(pair, k, c0, 1.0, 0), beta_k)
    b = pullback(EP.gluing_map(pair, k, c0, 1.0, 1), beta_k)
    assert form_discrepancy(a, b, pts) == 0.0


# --- injected faults -------------------------------------------------------------


def test_fault_gluing_boundary_mu(pair):
    assert not EP.gluing_compatibility_check(pair, samples=100, boundary_mu=pair.mu + 1e-6).passed


def test_fault_volume(pair):
    ch = pair.chart
    bump = wedge(ch.d("tau"), ch.d("x")) * 1e-6
    rep = EP.volume_identity_check(pair, samples=500, perturbation=bump)
    assert not rep.passed


def test_fault_tameness(pair):
    from lawsonleaf.nil import KTChart, kt_symplectic_form

    k = KTChart(pair.nil)
    beta_k = kt_symplectic_form(k, pair.lam, pair.mu)
    cf = EP.collar_form(k, beta_k)
    ch = cf.chart
    assert EP.tameness_check(beta_k, cf, 200).passed
    bad = cf + wedge(ch.d("tau"), ch.d("x")) * 1e-6
    assert not EP.tameness_check(beta_k, bad, 200).passed


def test_fault_end_invariance(pair, monkeypatch):
    clean = EP.end_form
    ch = pair.chart
    tilt = wedge(ch.d("x"), ch.d("y")) * (ch.coordinate("tau") * 1e-6)
    monkeypatch.setattr(EP, "end_form", lambda p, nil=None: clean(p, nil) + tilt)
    assert not EP.end_invariance_check(pair, 200).passed


def test_fault_leaf_identification():
    field = EP.TurbulizationField()
    assert not EP.leaf_identification_check(E6, field, EP.frozen_c0(field, 3) + 1e-6, 5).passed


def test_fault_end_matching(pair, monkeypatch):
    clean = EP.kt_symplectic_form
    monkeypatch.setattr(EP, "kt_symplectic_form", lambda k, lam, mu: clean(k, lam, mu + 1e-6))
    assert not EP.end_matching_check(pair, samples=100).passed
