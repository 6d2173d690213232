"""End-periodic symplectic form on the product end N' x (T_s, oo) and the turbulization data.

On the end chart (tau, x, y, z) of N' = Nil(c1) with zeta = dz + a x dy,
a = -c1 / (2 pi):

    beta' = d(k zeta) + l dtau^dx + mu dy^zeta
          = k' dtau^zeta + a k dx^dy + l dtau^dx + mu dy^zeta,

and expanding the square (all other products repeat a 1-form)

    beta'^2 = (2 a k' k + 2 l mu) dtau^dx^dy^zeta.

On [T2, T3] k' < 0, so positivity needs lam > max(-a k' k / mu); that is the
inequality the cutoff construction certifies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .exterior import (
    Chart,
    ChartMap,
    DifferentialForm,
    ScalarField,
    exterior_derivative,
    form_discrepancy,
    pullback,
    wedge,
)
from .exterior import dual as D
from .milnor import WeightedPolynomial, end_to_ambient_array, sample_link_array
from .nil import KTChart, NilChart, kt_symplectic_form
from .report import VerificationReport, make_report

LOG_PI_THIRD = math.log(math.pi) / 3.0

# lim theta(t) - t along the trajectory from (r2, 0) for the default radii
# (0.01, 0.02, 0.03, 0.05), measured once with measure_c0 and frozen
THETA_OFFSET = -0.48348133471015575


class ConstructionError(ValueError):
    pass


class DomainError(ValueError):
    pass


def end_chart(nil: NilChart) -> Chart:
    return Chart(f"End({nil.c1})", ("tau", "x", "y", "z"))


def end_zeta(chart: Chart, nil: NilChart) -> DifferentialForm:
    return chart.d("z") + chart.d("y") * (chart.coordinate("x") * nil.structure_constant)


@dataclass(frozen=True)
class Assumption:
    """A fact used but not computed here; reports carry status "cited"."""

    name: str
    statement: str
    status: str = "cited"


KAPPA = Assumption(
    "kappa_extension",
    "the closed 2-form kappa on the compact leaf extends the end trace dy^zeta_N' (cohomological extension)",
)


def kappa_report() -> VerificationReport:
    return make_report(KAPPA.name, KAPPA.statement, 0, 0.0, 1.0, status=KAPPA.status, details={"end_trace": "dy^zeta"})


# --- cutoffs --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CutoffPair:
    nil: NilChart
    mu: float
    T: tuple  # (T0, T1, T2, T3)
    lam: float
    Ts: float
    bound_max: float  # max of -a k'k / mu on [T2, T3]
    bound_argmax: float
    link_bound_max: float  # max of -3 k'k / (4 mu pi) on [T2, T3]
    chart: Chart = field(repr=False)
    k: ScalarField = field(repr=False)
    l: ScalarField = field(repr=False)

    @property
    def margin(self) -> float:
        return 1.0 - self.bound_max / self.lam

    def regimes(self) -> list[tuple[float, float]]:
        T0, T1, T2, T3 = self.T
        return [(self.Ts, T0), (T0, T1), (T1, T2), (T2, T3), (T3, T3 + 2.0 * math.pi)]

    def k_prime(self, tau):
        return self.k.partial(0)((tau, 0.0, 0.0, 0.0))

    def coefficient(self, tau):
        """Hand-derived volume coefficient 2 a k' k + 2 l mu."""
        p = (tau, 0.0, 0.0, 0.0)
        a = self.nil.structure_constant
        return 2.0 * a * self.k_prime(tau) * self.k(p) + 2.0 * self.l(p) * self.mu

    def link_coefficient(self, tau):
        """The same expansion with the link constant 3 / 2 pi in place of 2 a (zeta_N normalization)."""
        p = (tau, 0.0, 0.0, 0.0)
        return 3.0 * self.k_prime(tau) * self.k(p) / (2.0 * math.pi) + 2.0 * self.l(p) * self.mu


def _k_fn(T2, T3):
    def k(p):
        t = p[0]
        return D.exp(t) * D.step((T3 - t) / (T3 - T2))

    return k


def _l_fn(T1, T2, lam):
    def l(p):
        return lam * D.step((p[0] - T1) / (T2 - T1))

    return l


def _scan_max(fn, lo, hi, grid: int = 10_000):
    ts = np.linspace(lo, hi, grid)
    vals = np.asarray(fn(ts), float)
    i = int(np.argmax(vals))
    a, b = ts[max(i - 1, 0)], ts[min(i + 1, grid - 1)]
    res = minimize_scalar(lambda t: -float(fn(np.array([t]))[0]), bounds=(a, b), method="bounded", options={"xatol": 1e-12})
    if -res.fun >= vals[i]:
        return float(-res.fun), float(res.x)
    return float(vals[i]), float(ts[i])


def build_cutoffs(mu: float, T, nil: NilChart | None = None, *, gap: float = 1.0, grid: int = 10_000) -> CutoffPair:
    """Build k, l and certify lam = 1.05 max(max_{[T2,T3]} -a k'k/mu, 1)."""
    if not mu > 0:
        raise ConstructionError("mu must be positive")
    T0, T1, T2, T3 = (float(t) for t in T)
    if not T0 < T1 < T2 < T3:
        raise ConstructionError("breakpoints must satisfy T0 < T1 < T2 < T3")
    if not gap > 0:
        raise ConstructionError("T_s gap must be positive")
    nil = nil or NilChart(-9)
    a = nil.structure_constant
    if a <= 0:
        raise ConstructionError("the end needs a positive structure constant (c1 < 0)")
    chart = end_chart(nil)
    k = ScalarField(chart, _k_fn(T2, T3), label="k")
    kp = k.partial(0)

    def kk(ts):
        p = (ts, 0.0, 0.0, 0.0)
        return kp(p) * k(p)

    M, arg = _scan_max(lambda ts: -a * kk(ts) / mu, T2, T3, grid)
    Pm, _ = _scan_max(lambda ts: -3.0 * kk(ts) / (4.0 * mu * math.pi), T2, T3, grid)
    lam = 1.05 * max(M, 1.0)
    l = ScalarField(chart, _l_fn(T1, T2, lam), label="l")
    pair = CutoffPair(nil, float(mu), (T0, T1, T2, T3), lam, T0 - gap, M, arg, Pm, chart, k, l)
    check_cutoff_invariants(pair, grid)
    return pair


def check_cutoff_invariants(pair: CutoffPair, grid: int = 10_000) -> dict:
    """Grid-assert the sign table; raises ConstructionError naming the interval."""
    T0, T1, T2, T3 = pair.T
    lam = pair.lam
    out = {}

    def sweep(lo, hi, closed=(True, True)):
        ts = np.linspace(lo, hi, grid)
        if not closed[0]:
            ts = ts[1:]
        if not closed[1]:
            ts = ts[:-1]
        p = (ts, 0.0, 0.0, 0.0)
        return ts, np.asarray(pair.k(p), float), np.asarray(pair.k_prime(ts), float), np.broadcast_to(np.asarray(pair.l(p), float), ts.shape)

    def need(cond, what):
        if not np.all(cond):
            raise ConstructionError(f"cutoff condition violated: {what}")

    ts, k, kp, l = sweep(T0, T1)
    need(np.abs(k - np.exp(ts)) <= 1e-12 * np.exp(ts), "k = e^tau on [T0, T1]")
    need(l == 0.0, "l = 0 on [T0, T1]")
    ts, k, kp, l = sweep(T1, T2, (False, False))
    need(kp > 0, "k' > 0 on (T1, T2)")
    need(l > 0, "l > 0 on (T1, T2)")
    out["min_l_T1_T2"] = float(np.min(l))
    ts, k, kp, l = sweep(T2, T3, (True, False))
    need(k > 0, "k > 0 on [T2, T3)")
    need(l == lam, "l = lam on [T2, T3]")
    ts, k, kp, l = sweep(T3, T3 + 2.0 * math.pi)
    need(k == 0.0, "k = 0 on [T3, oo)")
    need(l == lam, "l = lam on [T3, oo)")
    if not pair.bound_max < lam:
        raise ConstructionError("lam does not exceed the scanned bound")
    if not pair.link_bound_max < lam * 0.95:
        raise ConstructionError("lam misses the link-normalized bound by less than 5%")
    return out


# --- the end form ---------------------------------------------------------------


def end_form(pair: CutoffPair, nil: NilChart | None = None) -> DifferentialForm:
    """d(k zeta) + l dtau^dx + mu dy^zeta on the end chart."""
    nil = nil or pair.nil
    if nil.c1 != pair.nil.c1:
        raise ValueError("cutoffs were certified for a different nil-manifold")
    ch = pair.chart
    zeta = end_zeta(ch, nil)
    k_zeta = zeta * pair.k
    return (
        exterior_derivative(k_zeta)
        + wedge(ch.d("tau"), ch.d("x")) * pair.l
        + wedge(ch.d("y"), zeta) * pair.mu
    )


def regime_samples(pair: CutoffPair, samples: int, seed: int = 0):
    """End-chart points with tau stratified over the five regimes."""
    rng = np.random.default_rng(seed)
    per = [samples // 5 + (1 if i < samples % 5 else 0) for i in range(5)]
    taus = np.concatenate([rng.uniform(lo, hi, n) for (lo, hi), n in zip(pair.regimes(), per)])
    xyz = [rng.uniform(-10.0, 10.0, samples) for _ in range(3)]
    return (taus, *xyz)


def volume_identity_check(
    pair: CutoffPair, nil: NilChart | None = None, samples: int = 10_000, seed: int = 0, *, perturbation: DifferentialForm | None = None
) -> VerificationReport:
    """beta'^2 on (d_tau, d_x, d_y, d_z) against (2 a k'k + 2 l mu) dtau^dx^dy^zeta."""
    nil = nil or pair.nil
    beta = end_form(pair, nil)
    if perturbation is not None:
        beta = beta + perturbation
    ch = pair.chart
    zeta = end_zeta(ch, nil)
    vol = wedge(wedge(ch.d("tau"), ch.d("x")), wedge(ch.d("y"), zeta))
    sq = wedge(beta, beta)
    pts = regime_samples(pair, samples, seed)
    frame = [ch.basis(i) for i in range(4)]
    measured = np.asarray(sq.at(pts, frame), float)
    coef = np.asarray(pair.coefficient(pts[0]), float)
    expected = coef * np.asarray(vol.at(pts, frame), float)
    disc = float(np.max(np.abs(measured - expected)))
    closed = max((float(np.max(np.abs(c(pts)))) for c in exterior_derivative(beta).coeffs.values()), default=0.0)
    T2, T3 = pair.T[2], pair.T[3]
    band = (pts[0] >= T2) & (pts[0] <= T3)
    return make_report(
        "volume_identity",
        "beta'^2 = (2 a k'k + 2 l mu) dtau^dx^dy^zeta with a = -c1/(2 pi), positive everywhere",
        samples,
        disc,
        1e-9,
        positive={"coefficient_positive": float(np.min(coef)) > 0.0, "closed": closed < 1e-8},
        details={
            "c1": nil.c1,
            "lambda": pair.lam,
            "mu": pair.mu,
            "min_coefficient": float(np.min(coef)),
            "min_coefficient_T2_T3": float(np.min(coef[band])) if np.any(band) else float("nan"),
            "certified_floor_T2_T3": 2.0 * pair.mu * (pair.lam - pair.bound_max),
            "lambda_margin": pair.margin,
            "link_coefficient_max_gap": float(np.max(np.abs(coef - np.asarray(pair.link_coefficient(pts[0]), float)))),
            "closedness_residual": closed,
        },
    )


def end_invariance_check(pair: CutoffPair, samples: int = 1000, seed: int = 0) -> VerificationReport:
    """tau -> tau + pi on {tau >= T3} (1e-12) and z -> z + t for 10 random t (1e-10)."""
    beta = end_form(pair)
    ch = pair.chart
    rng = np.random.default_rng(seed)
    T3 = pair.T[3]
    far = (rng.uniform(T3, T3 + 2 * math.pi, samples), *[rng.uniform(-10, 10, samples) for _ in range(3)])
    shift = ChartMap.from_function(ch, ch, lambda p: (p[0] + math.pi, p[1], p[2], p[3]), "tau+pi")
    periodic = form_discrepancy(pullback(shift, beta), beta, far)
    pts = regime_samples(pair, samples, seed + 1)
    hopf = 0.0
    for t in rng.uniform(-2 * math.pi, 2 * math.pi, 10):
        zt = ChartMap.from_function(ch, ch, lambda p, t=t: (p[0], p[1], p[2], p[3] + t), "z+t")
        hopf = max(hopf, form_discrepancy(pullback(zt, beta), beta, pts))
    return make_report(
        "end_invariance",
        "the end form is invariant under tau -> tau + pi beyond T3 and under the Hopf z-shift",
        samples,
        max(periodic / 1e-12, hopf / 1e-10),
        1.0,
        details={"tau_shift_residual": periodic, "hopf_residual": hopf},
    )


# --- turbulization ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TurbulizationField:
    r0: float = 0.01
    r1: float = 0.02
    r2: float = 0.03
    r_star: float = 0.05
    c: float = LOG_PI_THIRD

    def __post_init__(self):
        if not 0 < self.r0 < self.r1 < self.r2 < self.r_star:
            raise ConstructionError("radii must satisfy 0 < r0 < r1 < r2 < r*")

    def g(self, r):
        return -self.c * r * D.step((r - self.r0) / (self.r1 - self.r0))

    def h(self, r):
        return D.step((self.r2 - r) / (self.r2 - self.r1))

    def derivative(self, fn, r):
        tag = D.new_tag()
        return D.infinitesimal(fn(D.Dual(r, 1.0, tag)), tag)

    def sign_margins(self, grid: int = 10_000, inset: float = 0.05) -> dict:
        """Grid-check the sign table; margins are measured on closed subintervals inset by a fraction."""
        r0, r1, r2, rs = self.r0, self.r1, self.r2, self.r_star
        out = {}
        r = np.linspace(1e-6, rs, grid, endpoint=False)
        g, h = np.asarray(self.g(r)), np.asarray(self.h(r))
        gp, hp = np.asarray(self.derivative(self.g, r)), np.asarray(self.derivative(self.h, r))
        ok = {
            "g_zero": bool(np.all(g[r <= r0] == 0.0)),
            "h_one": bool(np.all(h[r <= r1] == 1.0)),
            "g_linear": bool(np.all(np.abs(g[r >= r1] + self.c * r[r >= r1]) <= 1e-15)),
            "h_zero": bool(np.all(h[r >= r2] == 0.0)),
            "g_decreasing": bool(np.all(gp[(r > r0)] < 0)),
            "h_decreasing": bool(np.all(hp[(r > r1) & (r < r2)] < 0)),
        }
        di = inset * (r1 - r0)
        sub = (r >= r0 + di) & (r <= rs)
        out["g_prime_margin"] = float(-np.max(gp[sub]))
        dj = inset * (r2 - r1)
        sub = (r >= r1 + dj) & (r <= r2 - dj)
        out["h_prime_margin"] = float(-np.max(hp[sub]))
        out.update(ok)
        return out


def _step_float(t: float) -> float:
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0
    u = min(max(1.0 / t - 1.0 / (1.0 - t), -700.0), 700.0)
    return 1.0 / (1.0 + math.exp(u))


def _fast_field(field: "TurbulizationField", r: float):
    """Scalar g, h with the same formulas as the dual-evaluable versions."""
    g = -field.c * r * _step_float((r - field.r0) / (field.r1 - field.r0))
    h = _step_float((field.r2 - r) / (field.r2 - field.r1))
    return g, h


def turbulization_flow(field: TurbulizationField, start, time: float, step: float = 1e-3):
    """Classical RK4 for (r', theta') = (g(r), h(r)); r must stay in (0, r*)."""
    r, th = (float(v) for v in start)
    if not 0 < r < field.r_star:
        raise DomainError(f"r = {r} is outside (0, r*)")
    n = max(1, int(math.ceil(abs(time) / step)))
    hstep = time / n

    def rhs(r):
        return _fast_field(field, r)

    for _ in range(n):
        a1, b1 = rhs(r)
        a2, b2 = rhs(r + 0.5 * hstep * a1)
        a3, b3 = rhs(r + 0.5 * hstep * a2)
        a4, b4 = rhs(r + hstep * a3)
        r = r + hstep / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        th = th + hstep / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
        if not 0 < r < field.r_star:
            raise DomainError(f"trajectory left (0, r*) at r = {r}")
    return float(r), float(th)


def tau2(field: TurbulizationField, degree: int = 3) -> float:
    """Product coordinate of the radius r2: |f| / rho^d = e^{-d tau / 2}."""
    return -(2.0 / degree) * math.log(field.r2)


def frozen_c0(field: TurbulizationField, degree: int = 3, theta_offset: float = THETA_OFFSET) -> float:
    return theta_offset - tau2(field, degree)


def measure_c0(field: TurbulizationField, degree: int = 3, t_end: float = 20.0, step: float = 1e-3) -> float:
    """c0 = theta(t) - t - tau2 for the trajectory from (r2, 0) once r <= r1 (then theta' = 1)."""
    r, th = turbulization_flow(field, (field.r2, 0.0), t_end, step)
    if r > field.r1:
        raise DomainError("trajectory has not entered r <= r1; increase t_end")
    return th - t_end - tau2(field, degree)


def leaf_identification_check(
    f: WeightedPolynomial, field: TurbulizationField, c0: float, samples: int = 100, seed: int = 0
) -> VerificationReport:
    """Trajectories from (P, r2, theta) pair with (P, tau2 + t) of F_{e^{i theta}} up to the frozen c0."""
    rng = np.random.default_rng(seed)
    times = np.linspace(4.0, 20.0, 5)
    offs = []
    for t in times:
        r, th = turbulization_flow(field, (field.r2, 0.0), float(t))
        offs.append(th - (tau2(field, f.degree) + t) - c0)
    c0_res = float(np.max(np.abs(offs)))
    P = sample_link_array(f, samples, seed)
    thetas = rng.uniform(0, 2 * math.pi, samples)
    ts = rng.uniform(0.0, 3.0, samples)
    Z = np.stack(
        [np.asarray(end_to_ambient_array(f, P[i : i + 1], tau2(field, f.degree) + ts[i], thetas[i]))[0] for i in range(samples)]
    )
    arg = np.angle(f(Z) * np.exp(-1j * thetas))
    arg_res = float(np.max(np.abs(arg)))
    return make_report(
        f"leaf_identification_{f.name}",
        "the turbulized leaf angle is tau + c0 + theta once r <= r1, with the product end on arg f = theta",
        samples,
        c0_res,
        1e-8,
        positive={"on_fibre": arg_res < 1e-6},
        details={"c0": float(c0), "c0_residual": c0_res, "arg_residual": arg_res, "tau2": tau2(field, f.degree)},
    )


# --- tameness and gluing ------------------------------------------------------------


def collar_chart(k: KTChart) -> Chart:
    return Chart(f"Collar({k.nil.c1})", k.chart.coords + ("s",))


def collar_projection(collar: Chart, boundary: Chart) -> ChartMap:
    return ChartMap.from_function(collar, boundary, lambda p: tuple(p[:4]), "Pr")


def collar_form(k: KTChart, boundary_form: DifferentialForm) -> DifferentialForm:
    ch = collar_chart(k)
    return pullback(collar_projection(ch, k.chart), boundary_form)


def tameness_check(
    boundary_form: DifferentialForm, collar: DifferentialForm, samples: int = 1000, seed: int = 0, epsilon: float = 0.1
) -> VerificationReport:
    """Leafwise (no ds) coefficients of the collar form equal those of Pr^* of the boundary form."""
    b = boundary_form.chart
    ch = collar.chart
    if ch.dim != b.dim + 1 or ch.coords[: b.dim] != b.coords:
        raise ValueError("collar chart must extend the boundary chart by one coordinate")
    ref = pullback(collar_projection(ch, b), boundary_form)
    rng = np.random.default_rng(seed)
    pts = (*[rng.uniform(-10, 10, samples) for _ in range(b.dim)], rng.uniform(0.0, epsilon, samples))
    s_idx = b.dim
    worst = 0.0
    for idx in set(collar.coeffs) | set(ref.coeffs):
        if s_idx in idx:
            continue
        diff = np.asarray(collar.coefficient(idx)(pts)) - np.asarray(ref.coefficient(idx)(pts))
        worst = max(worst, float(np.max(np.abs(diff))))
    return make_report(
        "tameness",
        "on the collar the leafwise form is the pullback of the boundary-leaf form under the collar projection",
        samples,
        worst,
        1e-10,
        details={"epsilon": float(epsilon)},
    )


def gluing_map(pair: CutoffPair, k: KTChart, c0: float, theta: float, j: int, order: int = 3) -> ChartMap:
    """(tau, x, y, z) -> (tau + c0 + theta, x, y, z + (theta + 2 j pi)/order)."""
    shift = (theta + 2.0 * j * math.pi) / order
    return ChartMap.from_function(
        pair.chart, k.chart, lambda p: (p[0] + c0 + theta, p[1], p[2], p[3] + shift), f"p[{theta!r},{j}]"
    )


GLUING_THETAS = (0.0, 2.0 * math.pi / 3.0, math.pi, 1.5 * math.pi)


def gluing_compatibility_check(
    pair: CutoffPair,
    c0: float | None = None,
    samples: int = 1000,
    seed: int = 0,
    *,
    order: int = 3,
    boundary_mu: float | None = None,
) -> VerificationReport:
    """Pullbacks of the Kodaira-Thurston form by the twelve identifications agree with the end form beyond T3."""
    c0 = frozen_c0(TurbulizationField()) if c0 is None else c0
    k = KTChart(pair.nil)
    beta_k = kt_symplectic_form(k, pair.lam, pair.mu if boundary_mu is None else boundary_mu)
    beta = end_form(pair)
    rng = np.random.default_rng(seed)
    T3 = pair.T[3]
    pts = (rng.uniform(T3, T3 + 2 * math.pi, samples), *[rng.uniform(-10, 10, samples) for _ in range(3)])
    worst = 0.0
    spread = 0.0
    for th in GLUING_THETAS:
        pulled = [pullback(gluing_map(pair, k, c0, th, j, order), beta_k) for j in range(3)]
        for pb in pulled:
            worst = max(worst, form_discrepancy(pb, beta, pts))
        spread = max(spread, form_discrepancy(pulled[0], pulled[1], pts), form_discrepancy(pulled[0], pulled[2], pts))
    return make_report(
        "gluing_compatibility",
        "all identifications (theta, k) pull the boundary-leaf form back to the end form",
        samples * 12,
        max(worst, spread),
        1e-9,
        details={"end_discrepancy": worst, "branch_spread": spread, "c0": float(c0)},
    )


def end_matching_check(pair: CutoffPair, c0: float | None = None, samples: int = 1000, seed: int = 0) -> VerificationReport:
    """Tameness of the end: a collar leaf parameterized by the end chart carries the end form."""
    c0 = frozen_c0(TurbulizationField()) if c0 is None else c0
    k = KTChart(pair.nil)
    beta_k = kt_symplectic_form(k, pair.lam, pair.mu)
    cf = collar_form(k, beta_k)
    ch = cf.chart
    T3 = pair.T[3]
    leaf = ChartMap.from_function(
        pair.chart, ch, lambda p: (p[0] + c0, p[1], p[2], p[3], 0.05 * D.exp(T3 - p[0])), "leaf"
    )
    rng = np.random.default_rng(seed)
    pts = (rng.uniform(T3, T3 + 2 * math.pi, samples), *[rng.uniform(-10, 10, samples) for _ in range(3)])
    disc = form_discrepancy(pullback(leaf, cf), end_form(pair), pts)
    collar_rep = tameness_check(beta_k, cf, samples, seed)
    return make_report(
        "end_matches_boundary",
        "beyond T3 the end form is lam dtau^dx + mu dy^zeta, the boundary-leaf form pulled back along the collar",
        samples,
        max(disc, collar_rep.max_residual),
        1e-10,
        details={"leaf_pullback_discrepancy": disc, "collar_discrepancy": collar_rep.max_residual},
    )
