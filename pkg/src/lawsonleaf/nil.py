"""Heisenberg nil-manifolds Nil^3(c1) and the Kodaira-Thurston leaf K = N x S^1.

Convention (fixed once, tested everywhere): on the universal cover with
coordinates (x, y, z), all of period 2*pi,

    zeta = dz + a * x * dy,     a = -c1 / (2*pi),     d zeta = a dx^dy.

Deck generators:

    g1: (x, y, z) -> (x + 2*pi, y, z + c1 * y)
    g2: (x, y, z) -> (x, y + 2*pi, z)
    g3: (x, y, z) -> (x, y, z + 2*pi)

The shear in g1 is forced: g1^* zeta = dz + c1 dy + a (x + 2*pi) dy
= zeta + (c1 + 2*pi*a) dy, which vanishes exactly for a = -c1/(2*pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exterior import (
    Chart,
    ChartMap,
    DifferentialForm,
    exterior_derivative,
    pfaffian4,
    pullback,
    wedge,
)
from .report import VerificationReport, make_report

TWO_PI = 2.0 * math.pi


def _translation(chart: Chart, shifts: dict, name: str, shear=None) -> ChartMap:
    idx = {chart.index(k): v for k, v in shifts.items()}

    def fn(p):
        out = [p[i] + idx[i] if i in idx else p[i] for i in range(chart.dim)]
        if shear is not None:
            target, source, factor = shear
            out[target] = out[target] + factor * p[source]
        return tuple(out)

    return ChartMap.from_function(chart, chart, fn, name)


@dataclass(frozen=True, eq=False)
class NilChart:
    c1: int
    chart: Chart = field(init=False)

    def __post_init__(self):
        if int(self.c1) != self.c1:
            raise ValueError("Euler class must be an integer")
        object.__setattr__(self, "chart", Chart(f"Nil({self.c1})", ("x", "y", "z")))

    @property
    def structure_constant(self) -> float:
        """The a in d zeta = a dx^dy."""
        return -self.c1 / TWO_PI

    def deck_generators(self) -> list[ChartMap]:
        ch = self.chart
        return [
            _translation(ch, {"x": TWO_PI}, "gamma1", shear=(ch.index("z"), ch.index("y"), float(self.c1))),
            _translation(ch, {"y": TWO_PI}, "gamma2"),
            _translation(ch, {"z": TWO_PI}, "gamma3"),
        ]

    def fiber_rotation(self, t: float) -> ChartMap:
        """Circle action on the fibres (the Hopf flow on the link): z -> z + t."""
        return _translation(self.chart, {"z": t}, f"rot({t!r})")


def connection_form(n: NilChart) -> DifferentialForm:
    ch = n.chart
    x = ch.coordinate("x")
    return ch.d("z") + ch.d("y") * (x * n.structure_constant)


def heisenberg_chart() -> tuple[Chart, DifferentialForm, ChartMap]:
    """Matrix coordinates (xb, yb, zb) with the sign-flipped invariant form.

    Returns the chart, zeta_bar = dzb + xb dyb (so d zeta_bar = dxb^dyb), and
    the lattice generator (xb, yb, zb) -> (xb + 1, yb, zb - yb), which fixes it.
    """
    ch = Chart("H", ("xb", "yb", "zb"))
    zeta = ch.d("zb") + ch.d("yb") * ch.coordinate("xb")
    gamma = ChartMap.from_function(ch, ch, lambda p: (p[0] + 1.0, p[1], p[2] - p[1]), "gamma1_bar")
    return ch, zeta, gamma


def _samples(n: int, dim: int, seed: int, low=0.0, high=TWO_PI):
    rng = np.random.default_rng(seed)
    return tuple(rng.uniform(low, high, n) for _ in range(dim))


def contact_check(n: NilChart, samples: int, seed: int = 0, floor: float = 1e-12) -> VerificationReport:
    """zeta ^ d zeta on (dx, dy, dz) must be a nonzero constant of one sign."""
    ch = n.chart
    zeta = connection_form(n)
    vol = wedge(zeta, exterior_derivative(zeta))
    pts = _samples(samples, 3, seed)
    vals = np.broadcast_to(np.asarray(vol.at(pts, [ch.basis(0), ch.basis(1), ch.basis(2)]), float), (samples,))
    min_abs = float(np.min(np.abs(vals)))
    spread = float(np.max(vals) - np.min(vals))
    one_sign = bool(np.all(vals > 0) or np.all(vals < 0))
    return make_report(
        "contact_condition",
        "zeta ^ d zeta is a nowhere-vanishing constant multiple of dx^dy^dz",
        samples,
        spread,
        1e-12,
        positive={"nonzero": min_abs > floor, "one_sign": one_sign},
        details={"c1": n.c1, "min_abs_value": min_abs, "value": float(vals[0])},
    )


def euler_class_integral(n: NilChart, grid: int = 512) -> float:
    """Midpoint-rule integral of d zeta over the base torus divided by -2*pi."""
    ch = n.chart
    dz = exterior_derivative(connection_form(n))
    h = TWO_PI / grid
    mid = (np.arange(grid) + 0.5) * h
    X, Y = np.meshgrid(mid, mid, indexing="ij")
    vals = dz.at((X.ravel(), Y.ravel(), np.zeros(X.size)), [ch.basis(0), ch.basis(1)])
    vals = np.broadcast_to(np.asarray(vals, float), (X.size,))
    return float(np.sum(vals) * h * h / -TWO_PI)


@dataclass(frozen=True, eq=False)
class KTChart:
    """K = N x S^1 with coordinates (tau, x, y, z); tau has period pi."""

    nil: NilChart
    tau_period: float = math.pi
    chart: Chart = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "chart", Chart(f"K({self.nil.c1})", ("tau", "x", "y", "z")))

    def tau_deck(self) -> ChartMap:
        return _translation(self.chart, {"tau": self.tau_period}, "tau_deck")

    def deck_generators(self) -> list[ChartMap]:
        ch = self.chart
        return [
            self.tau_deck(),
            _translation(ch, {"x": TWO_PI}, "gamma1", shear=(ch.index("z"), ch.index("y"), float(self.nil.c1))),
            _translation(ch, {"y": TWO_PI}, "gamma2"),
            _translation(ch, {"z": TWO_PI}, "gamma3"),
        ]

    def z_shift(self, t: float) -> ChartMap:
        return _translation(self.chart, {"z": t}, f"hopf({t!r})")

    def tau_shift(self, t: float) -> ChartMap:
        return _translation(self.chart, {"tau": t}, f"tau+({t!r})")

    def zeta(self) -> DifferentialForm:
        ch = self.chart
        return ch.d("z") + ch.d("y") * (ch.coordinate("x") * self.nil.structure_constant)


def kt_symplectic_form(k: KTChart, lam: float, mu: float) -> DifferentialForm:
    """lam dtau^dx + mu dy^zeta."""
    if lam == 0 or mu == 0:
        raise ValueError("lambda and mu must both be nonzero")
    ch = k.chart
    return wedge(ch.d("tau"), ch.d("x")) * float(lam) + wedge(ch.d("y"), k.zeta()) * float(mu)


def kt_form_check(k: KTChart, lam: float, mu: float, samples: int, seed: int = 0) -> VerificationReport:
    """Closedness, constant Pfaffian lam*mu and deck / fibre-rotation invariance."""
    ch = k.chart
    beta = kt_symplectic_form(k, lam, mu)
    pts = _samples(samples, 4, seed, -10.0, 10.0)
    frame = [ch.basis(i) for i in range(4)]
    dbeta = exterior_derivative(beta)
    closed = max(
        (float(np.max(np.abs(c(pts)))) for c in dbeta.coeffs.values()),
        default=0.0,
    )
    pf = np.broadcast_to(np.asarray(pfaffian4(beta, pts, frame), float), (samples,))
    pf_dev = float(np.max(np.abs(pf - lam * mu)))
    maps = k.deck_generators() + [k.z_shift(t) for t in np.random.default_rng(seed + 1).uniform(-7, 7, 10)]
    inv = 0.0
    for phi in maps:
        pb = pullback(phi, beta)
        for idx in set(pb.coeffs) | set(beta.coeffs):
            diff = np.asarray(pb.coefficient(idx)(pts)) - np.asarray(beta.coefficient(idx)(pts))
            inv = max(inv, float(np.max(np.abs(diff))))
    min_pf = float(np.min(np.abs(pf)))
    return make_report(
        "kodaira_thurston_form",
        "lam dtau^dx + mu dy^zeta is closed, non-degenerate and deck/fibre-rotation invariant",
        samples,
        inv,
        1e-10,
        positive={
            "closed": closed < 1e-8,
            "pfaffian_constant": pf_dev < 1e-12 * max(1.0, abs(lam * mu)),
            "pfaffian_nonzero": min_pf >= 0.9 * abs(lam * mu),
        },
        details={
            "lambda": float(lam),
            "mu": float(mu),
            "closedness_residual": closed,
            "pfaffian_deviation": pf_dev,
            "invariance_residual": inv,
            "min_abs_pfaffian": min_pf,
        },
    )


def structure_equation_check(n: NilChart, samples: int, seed: int = 0) -> VerificationReport:
    """d zeta(dx, dy) = -c1/(2*pi) everywhere, plus the Euler class by quadrature."""
    ch = n.chart
    dz = exterior_derivative(connection_form(n))
    pts = _samples(samples, 3, seed, -20.0, 20.0)
    vals = np.broadcast_to(np.asarray(dz.at(pts, [ch.basis(0), ch.basis(1)]), float), (samples,))
    err = float(np.max(np.abs(vals - n.structure_constant)))
    euler = euler_class_integral(n)
    return make_report(
        f"structure_equation_c1_{n.c1}".replace("-", "m"),
        "d zeta = (-c1 / 2 pi) dx^dy and the base integral recovers c1",
        samples,
        err,
        1e-10,
        positive={"euler_class": abs(euler - n.c1) < 1e-6},
        details={"c1": n.c1, "euler_integral": euler, "expected_coefficient": n.structure_constant},
    )
