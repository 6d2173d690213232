"""Deterministic verification suite runner.

    lawsonleaf verify --config <path|default_e6|default_e7|default_e8> [--only g1,g2] [--parallel] [--out DIR]
    lawsonleaf profile --config <path|preset> --out <csv-path>

Exit codes: 0 all checks pass, 1 some check failed, 2 configuration error.
LAWSONLEAF_THREADS caps the worker count used by --parallel.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import endperiodic as EP
from . import milnor as MI
from . import nil as NI
from . import symplectic as SY
from .exterior import wedge
from .report import VerificationReport, make_report

THREAD_ENV = "LAWSONLEAF_THREADS"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SuiteConfig:
    polynomial: str = "E6"
    seed: int = 0
    # end-periodic data
    mu: float = 0.05
    T0: float = 0.0
    T1: float = 1.0
    T2: float = 2.0
    T3: float = 3.0
    ts_gap: float = 1.0
    # turbulization
    r0: float = 0.01
    r1: float = 0.02
    r2: float = 0.03
    r_star: float = 0.05
    theta_offset: float = EP.THETA_OFFSET
    # symplectic side
    radii: tuple = (2.0, 4.0, 8.0, 16.0, 32.0)
    epsilon: float = 0.1
    band_low: float = 1e-6
    band_high: float = 0.1
    rhobar_star: float = math.e**4
    varrho: float = math.e
    flow_step: float = 1e-3
    # tolerances
    regularity_floor: float = 1e-4
    slope_tolerance: float = 0.3
    sup_threshold: float = 0.1
    # sample budgets
    samples_nil: int = 1000
    samples_kt: int = 10000
    samples_regularity: int = 10000
    samples_liouville: int = 1000
    samples_symplectization: int = 100
    samples_convergence: int = 1000
    samples_closeness: int = 200
    samples_reembedding: int = 1000
    samples_volume: int = 10000
    samples_invariance: int = 1000
    samples_leaf: int = 50
    samples_tameness: int = 1000
    samples_gluing: int = 1000
    profile_points: int = 1001
    out: str = "lawsonleaf_out"

    def validate(self) -> "SuiteConfig":
        if self.polynomial not in MI.POLYNOMIALS:
            raise ConfigError(f"unknown polynomial {self.polynomial!r}; choose from {sorted(MI.POLYNOMIALS)}")
        if not self.mu > 0:
            raise ConfigError("mu must be positive")
        if not self.T0 < self.T1 < self.T2 < self.T3:
            raise ConfigError("breakpoints must satisfy T0 < T1 < T2 < T3")
        if not 0 < self.r0 < self.r1 < self.r2 < self.r_star:
            raise ConfigError("radii must satisfy 0 < r0 < r1 < r2 < r_star")
        if len(self.radii) < 2 or any(r <= 1 for r in self.radii) or list(self.radii) != sorted(set(self.radii)):
            raise ConfigError("radii must be increasing and > 1")
        if not 0 < self.band_low < self.band_high:
            raise ConfigError("need 0 < band_low < band_high")
        if not self.rhobar_star > 1:
            raise ConfigError("rhobar_star must exceed 1")
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name.startswith("samples_") or f.name == "profile_points":
                if v < 1:
                    raise ConfigError(f"{f.name} must be positive")
            elif f.name in ("ts_gap", "epsilon", "varrho", "flow_step", "regularity_floor", "slope_tolerance", "sup_threshold"):
                if not v > 0:
                    raise ConfigError(f"{f.name} must be positive")
        return self

    def items(self) -> list[tuple[str, object]]:
        return [(f.name, getattr(self, f.name)) for f in fields(self)]


PRESETS = {
    "default_e6": SuiteConfig(polynomial="E6"),
    "default_e7": SuiteConfig(polynomial="E7"),
    "default_e8": SuiteConfig(polynomial="E8"),
}


def _convert(name: str, raw: str, default):
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(float(x) for x in raw.replace(",", " ").split())
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_config(text: str, base: SuiteConfig | None = None) -> SuiteConfig:
    """Flat key = value lines; '#' starts a comment; unknown keys are errors."""
    base = base or SuiteConfig()
    known = {f.name: getattr(base, f.name) for f in fields(base)}
    updates = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        updates[key] = _convert(key, raw, known[key])
    return replace(base, **updates).validate()


def load_config(name: str) -> SuiteConfig:
    if name in PRESETS:
        return PRESETS[name].validate()
    path = Path(name)
    if not path.is_file():
        raise ConfigError(f"no such config file or preset: {name}")
    return parse_config(path.read_text())


# --- suite -------------------------------------------------------------------------


@dataclass
class Context:
    cfg: SuiteConfig
    f: MI.WeightedPolynomial = field(init=False)
    link: NI.NilChart = field(init=False)
    end: NI.NilChart = field(init=False)

    def __post_init__(self):
        self.f = MI.polynomial(self.cfg.polynomial)
        self.link = NI.NilChart(self.f.link_c1)
        self.end = NI.NilChart(self.f.end_c1)
        self._pair = None

    def pair(self) -> EP.CutoffPair:
        if self._pair is None:
            c = self.cfg
            self._pair = EP.build_cutoffs(c.mu, (c.T0, c.T1, c.T2, c.T3), self.end, gap=c.ts_gap)
        return self._pair

    def field(self) -> EP.TurbulizationField:
        c = self.cfg
        return EP.TurbulizationField(c.r0, c.r1, c.r2, c.r_star)

    @property
    def c0(self) -> float:
        return EP.frozen_c0(self.field(), self.f.degree, self.cfg.theta_offset)


def _nil(ctx: Context):
    c = ctx.cfg
    out = [
        NI.structure_equation_check(ctx.link, c.samples_nil, c.seed),
        NI.structure_equation_check(ctx.end, c.samples_nil, c.seed),
        NI.contact_check(ctx.link, c.samples_nil, c.seed),
    ]
    kt = NI.kt_form_check(NI.KTChart(ctx.link), ctx.pair().lam, c.mu, c.samples_kt, c.seed)
    return out + [kt]


def _milnor(ctx: Context):
    c = ctx.cfg
    return [MI.milnor_regularity_check(ctx.f, (c.band_low, c.band_high), c.samples_regularity, c.seed, c.regularity_floor)]


def _symplectic(ctx: Context):
    c = ctx.cfg
    return [
        SY.liouville_identity_check(c.samples_liouville, c.seed),
        SY.symplectization_identification(
            ctx.f, c.rhobar_star, c.samples_symplectization, varrho=c.varrho, step=c.flow_step, seed=c.seed
        ),
        SY.contact_closeness(ctx.f, samples=c.samples_closeness, seed=c.seed, epsilon=c.epsilon),
    ]


def _convergence(ctx: Context):
    c = ctx.cfg
    rep = MI.convergence_law(ctx.f, tuple(c.radii), c.samples_convergence, c.seed)
    if c.slope_tolerance != rep.threshold:
        rep = make_report(
            rep.name, rep.statement, rep.samples, rep.max_residual, c.slope_tolerance,
            positive={"monotone": rep.details["flag_monotone"]},
            details={k: v for k, v in rep.details.items() if not k.startswith("flag_")},
        )
    return [rep]


def _reembedding(ctx: Context):
    c = ctx.cfg
    _, rep = SY.certify_reembedding(ctx.f, tuple(c.radii), c.samples_reembedding, c.seed, c.sup_threshold)
    return [rep]


def _cutoffs(ctx: Context):
    p = ctx.pair()
    return [
        make_report(
            "cutoff_certificate",
            "lam exceeds max over [T2, T3] of -a k'k / mu by the certification factor 1.05",
            10_000,
            p.bound_max / p.lam,
            1.0 / 1.05 + 1e-12,
            positive={"link_normalized_bound": p.link_bound_max < 0.95 * p.lam},
            details={
                "lambda": p.lam,
                "mu": p.mu,
                "bound_max": p.bound_max,
                "bound_argmax": p.bound_argmax,
                "link_bound_max": p.link_bound_max,
                "T": list(p.T),
                "Ts": p.Ts,
            },
        ),
        EP.kappa_report(),
    ]


def _volume(ctx: Context):
    c = ctx.cfg
    return [
        EP.volume_identity_check(ctx.pair(), ctx.end, c.samples_volume, c.seed),
        EP.end_invariance_check(ctx.pair(), c.samples_invariance, c.seed),
    ]


def _turbulization(ctx: Context):
    c = ctx.cfg
    fld = ctx.field()
    m = fld.sign_margins()
    flags = {k: v for k, v in m.items() if isinstance(v, bool)}
    margins = {k: v for k, v in m.items() if not isinstance(v, bool)}
    measured = EP.measure_c0(fld, ctx.f.degree)
    signs = make_report(
        "turbulization_field",
        "g, h satisfy the sign table of the turbulizing field; c0 matches its frozen value",
        10_000,
        abs(measured - ctx.c0),
        1e-8,
        positive=flags,
        details={**margins, "c0_measured": measured, "c0_frozen": ctx.c0},
    )
    return [signs, EP.leaf_identification_check(ctx.f, fld, ctx.c0, c.samples_leaf, c.seed)]


def _tameness(ctx: Context):
    c = ctx.cfg
    return [EP.end_matching_check(ctx.pair(), ctx.c0, c.samples_tameness, c.seed)]


def _gluing(ctx: Context):
    c = ctx.cfg
    return [EP.gluing_compatibility_check(ctx.pair(), ctx.c0, c.samples_gluing, c.seed, order=ctx.f.degree)]


CHECKS = {
    "nil": _nil,
    "milnor": _milnor,
    "symplectic": _symplectic,
    "convergence": _convergence,
    "reembedding": _reembedding,
    "cutoffs": _cutoffs,
    "volume": _volume,
    "turbulization": _turbulization,
    "tameness": _tameness,
    "gluing": _gluing,
}


def _guarded(name, fn, ctx) -> list[VerificationReport]:
    try:
        return fn(ctx)
    except Exception as exc:  # a crashing check is a failed check, the bundle is still written
        return [make_report(name, "check raised an exception", 0, float("inf"), 1.0, details={"error": f"{type(exc).__name__}: {exc}"})]


def thread_cap() -> int:
    raw = os.environ.get(THREAD_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def run_suite(cfg: SuiteConfig, only=None, parallel: bool = False) -> tuple[int, list[VerificationReport]]:
    names = list(CHECKS) if not only else [n for n in CHECKS if n in set(only)]
    ctx = Context(cfg)
    if any(n in names for n in ("nil", "cutoffs", "volume", "tameness", "gluing")):
        ctx.pair()  # build once before any worker needs it
    if parallel and len(names) > 1:
        with ThreadPoolExecutor(max_workers=min(thread_cap(), len(names))) as pool:
            groups = list(pool.map(lambda n: _guarded(n, CHECKS[n], ctx), names))
    else:
        groups = [_guarded(n, CHECKS[n], ctx) for n in names]
    reports = [r for g in groups for r in g]
    return (0 if all(r.passed for r in reports) else 1), reports


def render(cfg: SuiteConfig, reports: list[VerificationReport], status: int) -> str:
    lines = ["# lawsonleaf verification report", "[config]"]
    lines += [f"{k} = {_cfg_fmt(v)}" for k, v in cfg.items() if k != "out"]
    for r in reports:
        lines.append("")
        lines += r.lines()
    lines += ["", "[summary]", f"checks = {len(reports)}", f"failed = {sum(not r.passed for r in reports)}"]
    lines.append(f"exit_status = {status}")
    return "\n".join(lines) + "\n"


def _cfg_fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def profile_rows(cfg: SuiteConfig) -> list[tuple]:
    f = MI.polynomial(cfg.polynomial)
    end = NI.NilChart(f.end_c1)
    pair = EP.build_cutoffs(cfg.mu, (cfg.T0, cfg.T1, cfg.T2, cfg.T3), end, gap=cfg.ts_gap)
    beta = EP.end_form(pair, end)
    sq = wedge(beta, beta)
    ch = pair.chart
    taus = np.linspace(pair.Ts, cfg.T3 + 2.0 * math.pi, cfg.profile_points)
    one = np.ones_like(taus)
    pts = (taus, one, 0.0 * one, 0.0 * one)
    frame = [ch.basis(i) for i in range(4)]
    k = np.asarray(pair.k(pts), float)
    kp = np.broadcast_to(np.asarray(pair.k_prime(taus), float), taus.shape)
    l = np.broadcast_to(np.asarray(pair.l(pts), float), taus.shape)
    coef = np.asarray(pair.coefficient(taus), float)
    zeta = EP.end_zeta(ch, end)
    vol = wedge(wedge(ch.d("tau"), ch.d("x")), wedge(ch.d("y"), zeta))
    measured = np.broadcast_to(np.asarray(sq.at(pts, frame), float), taus.shape)
    disc = np.abs(measured - coef * np.asarray(vol.at(pts, frame), float))
    return list(zip(taus, k, kp, l, coef, measured, disc))


PROFILE_COLUMNS = ("tau", "k", "k_prime", "l", "coefficient", "wedge_value", "discrepancy")


def profile_volume(cfg: SuiteConfig, stream) -> None:
    stream.write(",".join(PROFILE_COLUMNS) + "\n")
    for row in profile_rows(cfg):
        stream.write(",".join("%.17g" % float(v) for v in row) + "\n")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="lawsonleaf", description="Verification suite for the leafwise symplectic constructions")
    sub = ap.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run the verification checks")
    v.add_argument("--config", required=True, help="config file or preset (default_e6, default_e7, default_e8)")
    v.add_argument("--only", help="comma-separated check groups: " + ", ".join(CHECKS))
    v.add_argument("--parallel", action="store_true", help="run check groups concurrently")
    v.add_argument("--out", help="output directory (overrides the config)")
    p = sub.add_parser("profile", help="write the volume-coefficient profile as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="CSV path, or - for stdout")
    args = ap.parse_args(argv)

    try:
        cfg = load_config(args.config)
        only = None
        if args.command == "verify" and args.only:
            only = [s.strip() for s in args.only.split(",") if s.strip()]
            bad = [s for s in only if s not in CHECKS]
            if bad:
                raise ConfigError(f"unknown check group(s): {', '.join(bad)}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    start = time.perf_counter()
    if args.command == "profile":
        if args.out == "-":
            profile_volume(cfg, sys.stdout)
        else:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            with open(args.out, "w", newline="") as fh:
                profile_volume(cfg, fh)
        print(f"wall_time = {time.perf_counter() - start:.3f}s", file=sys.stderr)
        return 0

    status, reports = run_suite(cfg, only, args.parallel)
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(render(cfg, reports, status))
    with open(out / "volume_profile.csv", "w", newline="") as fh:
        profile_volume(cfg, fh)
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}", file=sys.stderr)
    print(f"wall_time = {time.perf_counter() - start:.3f}s", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
