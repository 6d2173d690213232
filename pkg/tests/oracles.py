"""Independent reference computations for the tests.

Nothing here imports the package's dual numbers or form engine: formulas are
hand-derived and evaluated with plain math / numpy, derivatives by closed form
or central differences.
"""

import math

import numpy as np


def step(t):
    t = np.asarray(t, float)
    out = np.where(t >= 1.0, 1.0, 0.0)
    inside = (t > 0) & (t < 1)
    ti = np.where(inside, t, 0.5)
    a = np.exp(-1.0 / ti)
    b = np.exp(-1.0 / (1.0 - ti))
    return np.where(inside, a / (a + b), out)


def step_prime_fd(t, h=1e-6):
    return (step(t + h) - step(t - h)) / (2 * h)


def nil_structure_constant(c1):
    """d zeta (d_x, d_y) for zeta = dz - (c1 / 2 pi) x dy."""
    return -c1 / (2.0 * math.pi)


def k_cut(tau, T2, T3):
    return np.exp(tau) * (1.0 - step((np.asarray(tau) - T2) / (T3 - T2)))


def k_cut_prime(tau, T2, T3, h=1e-6):
    return (k_cut(tau + h, T2, T3) - k_cut(tau - h, T2, T3)) / (2 * h)


def lambda_bound(mu, T2, T3, c1=-9, n=200_001):
    """Dense-grid max of -a k'k / mu on [T2, T3], a = -c1 / 2 pi (finite-difference k')."""
    a = nil_structure_constant(c1)
    ts = np.linspace(T2, T3, n)
    return float(np.max(-a * k_cut_prime(ts, T2, T3) * k_cut(ts, T2, T3) / mu))


def volume_coefficient(tau, lam, mu, T, c1=-9):
    """(beta')^2 = (2 a k'k + 2 l mu) dtau^dx^dy^zeta, hand expansion."""
    T0, T1, T2, T3 = T
    a = nil_structure_constant(c1)
    l = lam * step((np.asarray(tau) - T1) / (T2 - T1))
    return 2 * a * k_cut_prime(tau, T2, T3) * k_cut(tau, T2, T3) + 2 * l * mu


def beta_star(u, v):
    """2 sum (u_x v_y - u_y v_x) on complex 3-vectors."""
    return 2.0 * np.sum(u.real * v.imag - u.imag * v.real, axis=-1)


def lambda_star(z, u):
    return np.sum(z.real * u.imag - z.imag * u.real, axis=-1)


def pfaffian_via_det(B):
    """|Pf| from sqrt(det) of the 4x4 antisymmetric matrix."""
    return math.sqrt(max(np.linalg.det(np.asarray(B, float)), 0.0))


def fermat(Z):
    return np.sum(Z**3, axis=-1)


def turbulization_closed_form(r0, t, c=math.log(math.pi) / 3):
    """r(t) for r' = -c r, in the region where g is linear and h vanishes."""
    return r0 * math.exp(-c * t)
