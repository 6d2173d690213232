"""Weighted-homogeneous surfaces in C^3: links, fibres, Newton retraction, Hopf actions.

Points of C^3 are complex arrays with a trailing axis of length 3. Everything
here is written with the generic operators of :mod:`lawsonleaf.exterior.dual`,
so a batch of points seeded with dual parts pushes tangent vectors through the
same code exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exterior import dual as D
from .report import VerificationReport, make_report


class SamplingError(RuntimeError):
    pass


class ProjectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class WeightedPolynomial:
    name: str
    monomials: tuple  # ((coef, (e0, e1, e2)), ...)
    weights: tuple
    degree: int
    link_c1: int

    def __post_init__(self):
        for coef, exps in self.monomials:
            wdeg = sum(w * e for w, e in zip(self.weights, exps))
            if wdeg != self.degree:
                raise ValueError(f"{self.name}: monomial {exps} has weighted degree {wdeg} != {self.degree}")

    @property
    def end_c1(self) -> int:
        """Euler class of the end quotient N' = N / (Z/degree)."""
        return self.link_c1 * self.degree

    def __call__(self, Z):
        total = 0.0
        for coef, exps in self.monomials:
            term = coef
            for j, e in enumerate(exps):
                if e:
                    term = term * Z[..., j] ** e
            total = total + term
        return total

    def gradient(self, Z):
        """Holomorphic partials df/dZ_j, stacked on the last axis."""
        parts = []
        for k in range(3):
            total = 0.0
            for coef, exps in self.monomials:
                if exps[k] == 0:
                    continue
                term = coef * exps[k]
                for j, e in enumerate(exps):
                    p = e - 1 if j == k else e
                    if p:
                        term = term * Z[..., j] ** p
                total = total + term
            parts.append(total)
        return D.stack(parts, axis=-1)

    def term_scale(self, Z):
        """Sum of |monomials|: the magnitude that sets roundoff in f(Z)."""
        total = 0.0
        for coef, exps in self.monomials:
            term = abs(coef)
            for j, e in enumerate(exps):
                if e:
                    term = term * np.abs(D.real_part(Z)[..., j]) ** e
            total = total + term
        return total


E6 = WeightedPolynomial("E6", ((1.0, (3, 0, 0)), (1.0, (0, 3, 0)), (1.0, (0, 0, 3))), (1, 1, 1), 3, -3)
E7 = WeightedPolynomial("E7", ((1.0, (4, 0, 0)), (1.0, (0, 4, 0)), (1.0, (0, 0, 2))), (1, 1, 2), 4, -2)
E8 = WeightedPolynomial("E8", ((1.0, (6, 0, 0)), (1.0, (0, 3, 0)), (1.0, (0, 0, 2))), (1, 2, 3), 6, -1)

POLYNOMIALS = {"E6": E6, "E7": E7, "E8": E8}


def polynomial(name: str) -> WeightedPolynomial:
    key = name.upper().replace("~", "").replace("TILDE", "")
    if key not in POLYNOMIALS:
        raise KeyError(f"unknown polynomial {name!r}; expected one of {sorted(POLYNOMIALS)}")
    return POLYNOMIALS[key]


@dataclass(frozen=True)
class AmbientPoint:
    z: np.ndarray

    @classmethod
    def from_reals(cls, coords) -> "AmbientPoint":
        c = np.asarray(coords, float)
        return cls(c[0::2] + 1j * c[1::2])

    @property
    def reals(self) -> tuple:
        return tuple(float(v) for pair in zip(self.z.real, self.z.imag) for v in pair)

    @property
    def rho(self) -> float:
        return float(np.linalg.norm(self.z))


@dataclass(frozen=True)
class EndPoint:
    base: AmbientPoint
    tau: float

    def __post_init__(self):
        # the base must lie on the link; tolerance as in the end-chart contract
        if abs(self.base.rho - 1.0) > 1e-10:
            raise ValueError("end point base is not on the unit sphere")


# --- actions ---------------------------------------------------------------


def weighted_scale(f: WeightedPolynomial, s, Z):
    """s . Z = (s^w0 Z0, s^w1 Z1, s^w2 Z2) for real or complex s (arrays broadcast)."""
    return D.stack([s ** w * Z[..., j] for j, w in enumerate(f.weights)], axis=-1)


def hopf_action(f: WeightedPolynomial, t, Z):
    """Z_j -> e^{i w_j t} Z_j; maps F_w to F_{e^{i d t} w}."""
    w = np.asarray(f.weights, float)
    phase = np.exp(1j * np.multiply.outer(np.asarray(t, float), w))
    if isinstance(Z, AmbientPoint):
        return AmbientPoint(Z.z * phase)
    return Z * phase


def weighted_radius(f: WeightedPolynomial, Z, iters: int = 60):
    """The s > 0 with s^{-1} . Z on the unit sphere (plain |Z| for E6)."""
    absz2 = D.real(Z * D.conj(Z))
    w = [float(x) for x in f.weights]
    rho2 = D.total(absz2, axis=-1)
    if all(x == 1.0 for x in w):
        return D.sqrt(rho2)
    # start where every term is <= 1 (F >= 0): Newton on this convex decreasing F then converges monotonically
    logs = [0.5 * D.log(absz2[..., j]) / w[j] for j in range(3)]
    pick = np.argmax(np.stack([D.real_part(v) for v in logs], axis=-1), axis=-1)
    u = D.where(pick == 0, logs[0], D.where(pick == 1, logs[1], logs[2]))
    for it in range(iters):
        terms = [D.exp(-2.0 * w[j] * u) * absz2[..., j] for j in range(3)]
        F = terms[0] + terms[1] + terms[2] - 1.0
        dF = -2.0 * (w[0] * terms[0] + w[1] * terms[1] + w[2] * terms[2])
        u = u - F / dF
        if np.max(np.abs(D.real_part(F))) < 1e-15 and it > 3:
            # a few extra sweeps so dual parts converge too
            for _ in range(2):
                terms = [D.exp(-2.0 * w[j] * u) * absz2[..., j] for j in range(3)]
                F = terms[0] + terms[1] + terms[2] - 1.0
                dF = -2.0 * (w[0] * terms[0] + w[1] * terms[1] + w[2] * terms[2])
                u = u - F / dF
            break
    return D.exp(u)


def normalize_to_sphere(f: WeightedPolynomial, Z):
    s = weighted_radius(f, Z)
    return weighted_scale(f, 1.0 / s, Z)


# --- Newton retraction -------------------------------------------------------


def newton_project(f: WeightedPolynomial, Z, w, *, rtol: float = 1e-12, maxiter: int = 50, extra: int | None = None):
    """Iterate Z <- Z - (f(Z) - w) conj(grad f) / |grad f|^2 until |f - w| <= rtol * max(1, term scale).

    Moves only along the complex gradient direction. Works on batches and on
    dual-seeded points; with dual inputs two extra sweeps converge the
    tangent parts as well.
    """
    if extra is None:
        extra = 2 if isinstance(Z, D.Dual) else 0
    tol = rtol * np.maximum(1.0, f.term_scale(Z))
    done_extra = 0
    for it in range(maxiter + 1):
        r = f(Z) - w
        converged = np.abs(D.real_part(r)) <= tol
        if np.all(converged):
            if done_extra >= extra:
                return Z
            done_extra += 1
        elif it == maxiter:
            break
        g = f.gradient(Z)
        g2 = D.total(D.real(g * D.conj(g)), axis=-1)
        if np.min(D.real_part(g2)) < 1e-16:
            raise ProjectionError("gradient vanishes: point too close to the singular point")
        coef = r / g2
        step = D.stack([coef * D.conj(g[..., j]) for j in range(3)], axis=-1)
        Z = Z - step
    raise ProjectionError(f"Newton retraction did not converge in {maxiter} iterations")


def newton_project_to_fiber(f: WeightedPolynomial, Z: AmbientPoint, w: complex) -> AmbientPoint:
    g = f.gradient(Z.z)
    if np.linalg.norm(g) <= 1e-8:
        raise ValueError("gradient too small; projection undefined near the origin")
    return AmbientPoint(np.asarray(newton_project(f, Z.z, w)))


# --- link sampling -----------------------------------------------------------


def _last_variable_power(f: WeightedPolynomial):
    for coef, exps in f.monomials:
        if exps[0] == 0 and exps[1] == 0 and exps[2] > 0:
            return coef, exps[2]
    raise ValueError(f"{f.name} has no pure monomial in the last variable")


def sample_link_array(f: WeightedPolynomial, count: int, seed: int, *, max_batches: int = 200) -> np.ndarray:
    """Points of N = F_0 on the unit sphere, shape (count, 3); deterministic in seed.

    The last coordinate is solved from random first two coordinates with a
    seed-drawn root branch; points within 1e-3 of a coordinate hyperplane are
    rejected before normalization.
    """
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    c_last, e_last = _last_variable_power(f)
    out = []
    have = 0
    for _ in range(max_batches):
        n = max(2 * (count - have), 16)
        Z01 = rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))
        branch = rng.integers(0, e_last, n)
        Z = np.concatenate([Z01, np.zeros((n, 1), complex)], axis=1)
        rest = f(Z)
        rhs = -rest / c_last
        root = np.abs(rhs) ** (1.0 / e_last) * np.exp(1j * (np.angle(rhs) + 2 * np.pi * branch) / e_last)
        Z[:, 2] = root
        keep = np.all(np.abs(Z) > 1e-3, axis=1)
        Z = Z[keep]
        if len(Z) == 0:
            continue
        Z = normalize_to_sphere(f, Z)
        for _ in range(2):
            Z = normalize_to_sphere(f, newton_project(f, Z, 0.0))
        ok = (np.abs(f(Z)) < 1e-12) & (np.abs(np.linalg.norm(Z, axis=1) - 1.0) < 1e-12)
        ok &= np.all(np.abs(Z) > 1e-3, axis=1)
        Z = Z[ok]
        out.append(Z)
        have += len(Z)
        if have >= count:
            return np.concatenate(out)[:count]
    raise SamplingError(f"could not draw {count} link points for {f.name}")


def sample_link(f: WeightedPolynomial, count: int, seed: int) -> list[AmbientPoint]:
    return [AmbientPoint(z) for z in sample_link_array(f, count, seed)]


# --- product coordinates of the end --------------------------------------------


def end_threshold(f: WeightedPolynomial, epsilon: float) -> float:
    """tau beyond which the end of F_1 is a graph over F_0: |f / rho^d| < epsilon."""
    return -(2.0 / f.degree) * math.log(epsilon)


def end_to_ambient_array(f: WeightedPolynomial, base, tau, theta, *, epsilon: float = 0.1):
    """Batch version: scale link points to weighted radius e^{tau/2}, retract onto F_{e^{i theta}}."""
    tau_min = float(np.min(D.real_part(tau)))
    if tau_min <= end_threshold(f, epsilon):
        raise ValueError(f"tau={tau_min} is not in the product end (needs > {end_threshold(f, epsilon)})")
    Z = weighted_scale(f, D.exp(0.5 * tau), base)
    return newton_project(f, Z, np.exp(1j * theta))


def end_to_ambient(f: WeightedPolynomial, e: EndPoint, theta: float, *, epsilon: float = 0.1) -> AmbientPoint:
    if abs(f(e.base.z)) > 1e-10:
        raise ValueError("end point base is not on the link")
    z = end_to_ambient_array(f, e.base.z[None, :], np.array([e.tau]), theta, epsilon=epsilon)
    return AmbientPoint(np.asarray(z)[0])


# --- checks ---------------------------------------------------------------------


def arg_gradient_on_sphere(f: WeightedPolynomial, Z: np.ndarray) -> np.ndarray:
    """|d(arg f)| restricted to T S^5 at unit-sphere points Z (batch)."""
    b = f.gradient(Z) / f(Z)[..., None]
    # d arg f (v) = Im(sum b_j (vx_j + i vy_j)) -> real gradient (Im b_j, Re b_j)
    g = np.stack([b.imag, b.real], axis=-1).reshape(len(Z), 6)
    n = np.stack([Z.real, Z.imag], axis=-1).reshape(len(Z), 6)
    n = n / np.linalg.norm(n, axis=1, keepdims=True)
    radial = np.sum(g * n, axis=1)
    return np.sqrt(np.maximum(np.sum(g * g, axis=1) - radial**2, 0.0))


def sample_tube(f: WeightedPolynomial, band: tuple, count: int, seed: int) -> np.ndarray:
    """Unit-sphere points with band[0] < |f| <= band[1]."""
    lo, hi = band
    if lo <= 0:
        raise ValueError("band must exclude the link (|f| = 0)")
    rng = np.random.default_rng([seed, 1])
    out, have = [], 0
    for k in range(50):
        base = sample_link_array(f, count, seed=seed * 1000 + k)
        r = rng.uniform(lo, hi, len(base))
        th = rng.uniform(0, 2 * np.pi, len(base))
        Z = normalize_to_sphere(f, newton_project(f, base, r * np.exp(1j * th)))
        a = np.abs(f(Z))
        Z = Z[(a > lo) & (a <= hi)]
        out.append(Z)
        have += len(Z)
        if have >= count:
            return np.concatenate(out)[:count]
    raise SamplingError("could not fill the tube band")


def milnor_regularity_check(
    f: WeightedPolynomial, band: tuple, samples: int, seed: int = 0, floor: float = 1e-4
) -> VerificationReport:
    """arg o f restricted to S^5 has no critical points in the tube band."""
    Z = sample_tube(f, band, samples, seed)
    norms = arg_gradient_on_sphere(f, Z)
    mn = float(np.min(norms))
    return make_report(
        f"milnor_regularity_{f.name}",
        "d(arg f) restricted to the sphere is nonvanishing for 0 < |f| <= epsilon",
        samples,
        floor / mn if mn > 0 else float("inf"),
        1.0,
        details={"min_projected_gradient": mn, "floor": floor, "band_low": float(band[0]), "band_high": float(band[1])},
    )


def sample_cone_band(f: WeightedPolynomial, count: int, seed: int, lo: float = 1.0, hi: float = math.exp(math.pi)):
    """Points of F_0 with weighted radius in [lo, hi] (log-uniform)."""
    base = sample_link_array(f, count, seed)
    s = np.exp(np.random.default_rng([seed, 2]).uniform(math.log(lo), math.log(hi), count))
    return weighted_scale(f, s, base)


def convergence_law(
    f: WeightedPolynomial, radii=(2, 4, 8, 16, 32), samples: int = 1000, seed: int = 0
) -> VerificationReport:
    """Sup displacement between R^{-1}.F_1(R) = F_{R^-d}(1) and F_0(1) decays like R^{-d}."""
    Q = sample_cone_band(f, samples, seed)
    sups = []
    for R in radii:
        Zw = newton_project(f, Q, float(R) ** (-f.degree))
        sups.append(float(np.max(np.linalg.norm(Zw - Q, axis=1))))
    slope = float(np.polyfit(np.log(radii), np.log(sups), 1)[0])
    monotone = all(b < a for a, b in zip(sups, sups[1:]))
    return make_report(
        f"convergence_law_{f.name}",
        "sup tubular displacement of F_{R^-d}(1) from F_0(1) fits slope -d in log-log",
        samples,
        abs(slope + f.degree),
        0.3,
        positive={"monotone": monotone},
        details={"radii": [float(r) for r in radii], "sup_displacement": sups, "slope": slope},
    )
