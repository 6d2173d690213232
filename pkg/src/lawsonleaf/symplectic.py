"""The convex symplectic structure of C^3 restricted to the fibres F_w.

beta* = 2 sum dx_j^dy_j and lambda* = sum (x_j dy_j - y_j dx_j) live on the
real chart (x0, y0, x1, y1, x2, y2). Tangent vectors of F_w are complex
3-vectors in ker(df); a real frame (u1, i u1, u2, i u2) from a unitary basis
carries the complex orientation, so Pfaffians of beta* on it are positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exterior import (
    Chart,
    ChartMap,
    DifferentialForm,
    ScalarField,
    TangentVector,
    exterior_derivative,
    interior,
    pfaffian4_matrix,
    wedge,
)
from .exterior import dual as D
from .milnor import (
    WeightedPolynomial,
    end_to_ambient_array,
    hopf_action,
    newton_project,
    sample_cone_band,
    sample_link_array,
    weighted_radius,
    weighted_scale,
)
from .report import VerificationReport, make_report

AMBIENT = Chart("C3", ("x0", "y0", "x1", "y1", "x2", "y2"))


class FrameError(ValueError):
    pass


def ambient_forms() -> tuple[DifferentialForm, DifferentialForm]:
    """(beta*, lambda*) on the real chart of C^3."""
    ch = AMBIENT
    beta = None
    lam = None
    for j in range(3):
        x, y = ch.coordinate(2 * j), ch.coordinate(2 * j + 1)
        b = wedge(ch.d(2 * j), ch.d(2 * j + 1)) * 2.0
        l = ch.d(2 * j + 1) * x - ch.d(2 * j) * y
        beta = b if beta is None else beta + b
        lam = l if lam is None else lam + l
    return beta, lam


def liouville_vector_field() -> list[ScalarField]:
    """Half the Euler field, as component fields on the real chart."""
    return [AMBIENT.coordinate(i) * 0.5 for i in range(6)]


def liouville_field(Z) -> TangentVector:
    z = np.asarray(getattr(Z, "z", Z), complex)
    if not np.any(np.abs(z) > 0):
        raise ValueError("the Liouville field is only used away from the origin")
    base = to_reals(z)
    return TangentVector(AMBIENT, base, tuple(0.5 * c for c in base))


def to_reals(Z):
    """Complex (..., 3) -> tuple of 6 real components (x0, y0, x1, y1, x2, y2)."""
    out = []
    for j in range(3):
        out.append(D.real(Z[..., j]))
        out.append(D.imag(Z[..., j]))
    return tuple(out)


def from_reals(comps):
    return D.stack([comps[2 * j] + 1j * comps[2 * j + 1] for j in range(3)], axis=-1)


# --- frames ---------------------------------------------------------------------


def _hdot(u, v):
    """Hermitian product sum conj(u) v on the last axis."""
    return np.sum(np.conj(u) * v, axis=-1)


def kernel_basis(a: np.ndarray, cond_max: float = 1e6) -> tuple[np.ndarray, np.ndarray]:
    """Unitary basis (u1, u2) of {delta : sum a_j delta_j = 0} for a batch of covectors a.

    Coordinate vectors are projected onto the kernel in index order and run
    through modified Gram-Schmidt; the largest projection starts, the larger
    remaining residual finishes.
    """
    n = a.shape[0]
    a2 = np.sum(np.abs(a) ** 2, axis=-1)
    eye = np.eye(3, dtype=complex)
    proj = np.stack([eye[k] - np.conj(a) * (a[:, k] / a2)[:, None] for k in range(3)], axis=1)
    norms = np.linalg.norm(proj, axis=-1)
    first = np.argmax(norms, axis=1)
    u1 = proj[np.arange(n), first] / norms[np.arange(n), first][:, None]
    coeff = np.einsum("nj,nkj->nk", np.conj(u1), proj)
    resid = proj - coeff[..., None] * u1[:, None, :]
    rn = np.linalg.norm(resid, axis=-1)
    rn[np.arange(n), first] = -1.0
    second = np.argmax(rn, axis=1)
    r2 = rn[np.arange(n), second]
    if np.any(r2 * cond_max < 1.0):
        raise FrameError("fibre frame is ill-conditioned")
    u2 = resid[np.arange(n), second] / r2[:, None]
    return u1, u2


def real_frame(u1: np.ndarray, u2: np.ndarray) -> list[tuple]:
    """(u1, i u1, u2, i u2) as real component tuples."""
    return [to_reals(u1), to_reals(1j * u1), to_reals(u2), to_reals(1j * u2)]


@dataclass(frozen=True)
class FiberFrame:
    f: WeightedPolynomial
    base: np.ndarray  # complex (3,)
    vectors: tuple  # four real 6-vectors

    def validate(self, tol: float = 1e-10):
        a = self.f.gradient(self.base)
        scale = np.linalg.norm(a)
        V = np.array(self.vectors, float)
        cz = V[:, 0::2] + 1j * V[:, 1::2]
        if np.max(np.abs(cz @ a)) > tol * max(1.0, scale):
            raise FrameError("frame vector leaves ker(df)")
        if np.max(np.abs(V @ V.T - np.eye(4))) > tol:
            raise FrameError("frame is not orthonormal")


def fiber_frame(f: WeightedPolynomial, Z) -> FiberFrame:
    z = np.asarray(getattr(Z, "z", Z), complex)
    u1, u2 = kernel_basis(f.gradient(z)[None, :])
    vecs = tuple(tuple(float(np.asarray(c)[0]) for c in v) for v in real_frame(u1, u2))
    return FiberFrame(f, z, vecs)


def restrict_to_fiber(form: DifferentialForm, frame: FiberFrame) -> np.ndarray:
    frame.validate()
    pt = to_reals(frame.base)
    return np.array([[float(form.at(pt, [u, v])) for v in frame.vectors] for u in frame.vectors])


def restricted_pfaffian(form: DifferentialForm, points, vectors) -> np.ndarray:
    """Batch Pfaffian of a 2-form on 4 real frame vectors (component tuples)."""
    B = [[form.at(points, [u, v]) for v in vectors] for u in vectors]
    return np.asarray(pfaffian4_matrix(B), float)


def pushforward(fn, Z, V):
    """Exact differential of fn (complex (...,3) -> complex (...,3)) applied to V, by one dual pass."""
    tag = D.new_tag()
    out = fn(D.Dual(Z, V, tag))
    return D.real_part(out), D.infinitesimal(out, tag)


# --- Liouville flow / symplectization ------------------------------------------------


def fiber_liouville(f: WeightedPolynomial, Z):
    """X_W = (1/2) orthogonal projection of Z onto T F_w; solves i_X beta*|_W = lambda*|_W."""
    a = f.gradient(Z)
    a2 = D.total(D.real(a * D.conj(a)), axis=-1)
    c = D.total(a * Z, axis=-1) / a2
    return 0.5 * D.stack([Z[..., j] - c * D.conj(a[..., j]) for j in range(3)], axis=-1)


@dataclass
class FlowResult:
    Z: object
    reprojections: int


def liouville_flow(f: WeightedPolynomial, Z, T, steps: int, w: complex = 1.0, reproject_every: int = 10, drift_tol: float = 1e-8):
    """Fixed-step classical RK4 for time T along X_W, with a fibre check every few steps."""
    h = T / steps
    count = 0
    for k in range(steps):
        k1 = fiber_liouville(f, Z)
        k2 = fiber_liouville(f, Z + (0.5 * h) * k1)
        k3 = fiber_liouville(f, Z + (0.5 * h) * k2)
        k4 = fiber_liouville(f, Z + h * k3)
        Z = Z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (k + 1) % reproject_every == 0:
            drift = np.abs(D.real_part(f(Z)) - w)
            if np.max(drift) > drift_tol:
                Z = newton_project(f, Z, w)
                count += 1
    return FlowResult(Z, count)


def points_on_level(f: WeightedPolynomial, rhobar: float, count: int, seed: int, w: complex = 1.0) -> np.ndarray:
    """Points of F_w with |Z|^2 = rhobar, by alternating fibre retraction and radial rescaling."""
    base = sample_link_array(f, count, seed)
    Z = weighted_scale(f, math.sqrt(rhobar), base)
    for _ in range(200):
        Z = newton_project(f, Z, w)
        r2 = np.sum(np.abs(Z) ** 2, axis=-1)
        if np.max(np.abs(r2 / rhobar - 1.0)) < 1e-15:
            break
        Z = Z * np.sqrt(rhobar / r2)[:, None]
    return newton_project(f, Z, w)


def _span3(vectors: list[np.ndarray]) -> list[np.ndarray]:
    """Orthonormal basis of the (rank three) real span of four complex 3-vectors, batch."""
    M = np.stack([np.concatenate([v.real, v.imag], axis=-1) for v in vectors], axis=1)
    _, sv, Vt = np.linalg.svd(M, full_matrices=False)
    if np.any(sv[:, 2] < 1e-6 * sv[:, 0]):
        raise FrameError("level frame is degenerate")
    return [Vt[:, i, :3] + 1j * Vt[:, i, 3:] for i in range(3)]


def level_frame(f: WeightedPolynomial, Z: np.ndarray) -> list[np.ndarray]:
    """Orthonormal complex 3-vectors spanning T(F_w cap {|Z| = const}), batch."""
    u1, u2 = kernel_basis(f.gradient(Z))
    X = np.asarray(fiber_liouville(f, Z))
    xn = X / np.sqrt(np.sum(np.abs(X) ** 2, axis=-1))[:, None]
    return _span3([v - np.real(_hdot(xn, v))[:, None] * xn for v in (u1, 1j * u1, u2, 1j * u2)])


def _lambda_star(Z, U):
    _, lam = ambient_forms()
    return np.asarray(lam.at(to_reals(Z), [to_reals(U)]), float)


def symplectization_error(f: WeightedPolynomial, P: np.ndarray, varrho: float, step: float, w: complex = 1.0) -> dict:
    """Transport level-set frames by the Liouville flow for time log(varrho) and compare
    Psi^*(lambda*) with varrho * lambda*|_M, and d Psi/d log(varrho) with X."""
    T = math.log(varrho)
    steps = max(1, int(round(abs(T) / step))) if T != 0 else 0
    frames = level_frame(f, P)
    n = len(P)
    if steps == 0:
        return {"lambda_rel_error": 0.0, "field_rel_error": 0.0, "reprojections": 0, "steps": 0}
    Zrep = np.concatenate([P] * 3)
    V = np.concatenate(frames)
    tag = D.new_tag()
    res = liouville_flow(f, D.Dual(Zrep, V, tag), T, steps, w)
    end = D.real_part(res.Z)
    dV = D.infinitesimal(res.Z, tag)
    lhs = _lambda_star(end, dV)
    rhs = varrho * _lambda_star(Zrep, V)
    scale = max(float(np.max(np.abs(rhs))), 1e-300)
    lam_err = float(np.max(np.abs(lhs - rhs))) / scale

    ttag = D.new_tag()
    res_t = liouville_flow(f, P, D.Dual(T, 1.0, ttag), steps, w)
    dZ = D.infinitesimal(res_t.Z, ttag)
    X = np.asarray(fiber_liouville(f, D.real_part(res_t.Z)))
    fld_err = float(np.max(np.linalg.norm(dZ - X, axis=-1) / np.linalg.norm(X, axis=-1)))
    return {
        "lambda_rel_error": lam_err,
        "field_rel_error": fld_err,
        "reprojections": res.reprojections,
        "steps": steps,
        "samples": n,
    }


def symplectization_identification(
    f: WeightedPolynomial,
    rhobar_star: float,
    samples: int = 100,
    *,
    varrho: float = math.e,
    step: float = 1e-3,
    order_steps: tuple = (0.2, 0.1, 0.05),
    seed: int = 0,
) -> VerificationReport:
    if rhobar_star <= 1.0:
        raise ValueError("the level rhobar* must exceed 1")
    P = points_on_level(f, rhobar_star, samples, seed)
    main = symplectization_error(f, P, varrho, step)
    coarse = [symplectization_error(f, P, varrho, h)["lambda_rel_error"] for h in order_steps]
    ratios = [a / b if b > 0 else float("inf") for a, b in zip(coarse, coarse[1:])]
    return make_report(
        f"symplectization_{f.name}",
        "Liouville flow Psi(varrho, P) = exp(log varrho X)(P) satisfies Psi^* lambda* = varrho lambda*|_M",
        samples,
        main["lambda_rel_error"],
        1e-6,
        positive={
            "field_transport": main["field_rel_error"] < 1e-6,
            "fourth_order": all(r >= 8.0 for r in ratios),
        },
        details={
            "rhobar_star": float(rhobar_star),
            "varrho": float(varrho),
            "step": float(step),
            "field_rel_error": main["field_rel_error"],
            "reprojections": main["reprojections"],
            "order_steps": [float(h) for h in order_steps],
            "order_errors": coarse,
            "order_ratios": ratios,
        },
    )


def liouville_identity_check(samples: int, seed: int = 0) -> VerificationReport:
    """i_X beta* = lambda*, d lambda* = beta*, d(i_X beta*) = beta* and X.rhobar = rhobar."""
    beta, lam = ambient_forms()
    X = liouville_vector_field()
    ixb = interior(X, beta)
    rng = np.random.default_rng(seed)
    pts = tuple(rng.uniform(-3, 3, samples) for _ in range(6))
    vecs = [tuple(rng.standard_normal(samples) for _ in range(6)) for _ in range(2)]
    contraction = float(np.max(np.abs(np.asarray(ixb.at(pts, vecs[:1])) - np.asarray(lam.at(pts, vecs[:1])))))
    dl = exterior_derivative(lam)
    exact = float(np.max(np.abs(np.asarray(dl.at(pts, vecs)) - np.asarray(beta.at(pts, vecs)))))
    cartan = float(np.max(np.abs(np.asarray(exterior_derivative(ixb).at(pts, vecs)) - np.asarray(beta.at(pts, vecs)))))
    rhobar = ScalarField(AMBIENT, lambda p: sum(c * c for c in p))
    grad = rhobar.gradient(pts)
    xr = sum(g * x for g, x in zip(grad, (0.5 * c for c in pts)))
    growth = float(np.max(np.abs(xr - rhobar(pts)) / np.maximum(1.0, rhobar(pts))))
    return make_report(
        "liouville_identity",
        "i_X beta* = lambda* for X half the Euler field; d lambda* = beta*; X.rhobar = rhobar",
        samples,
        contraction,
        1e-12,
        positive={"exact": exact < 1e-12, "cartan": cartan < 1e-12, "growth": growth < 1e-12},
        details={"d_lambda_minus_beta": exact, "cartan_residual": cartan, "x_rhobar_residual": growth},
    )


# --- re-embedding --------------------------------------------------------------------


def _psi(l, lo: float, hi: float):
    return 1.0 - D.step((l - lo) / (hi - lo))


@dataclass(frozen=True)
class Reembedding:
    """Interpolated graph between F_{R^-d}(1) and F_0(1), scaled back up by R.

    Pieces on F_1 (radius in units of R): identity for weighted radius <= psi_lo,
    the scaled graph of psi * (retraction displacement) on [1, e^pi], and the
    inverse tubular retraction onto F_0 for weighted radius >= psi_hi.
    """

    f: WeightedPolynomial
    R: float
    psi_lo: float = 2.0
    psi_hi: float = 3.0

    @property
    def w(self) -> float:
        return float(self.R) ** (-self.f.degree)

    def psi(self, l):
        return _psi(l, self.psi_lo, self.psi_hi)

    def retract(self, Q):
        return newton_project(self.f, Q, self.w)

    def graph(self, Q):
        """Point of the interpolated graph over Q in F_0(1), rescaled picture."""
        Y = self.retract(Q)
        t = self.psi(weighted_radius(self.f, Q))
        return D.stack([Q[..., j] + t * (Y[..., j] - Q[..., j]) for j in range(3)], axis=-1)

    def graph_piece(self, Q):
        return weighted_scale(self.f, float(self.R), self.graph(Q))

    def identity_piece(self, Y1):
        return Y1

    def tubular_parameter(self, Y, tol: float = 1e-15, maxiter: int = 100):
        """Q in F_0 whose retraction onto F_w is Y (rescaled picture)."""
        f = self.f
        Q = newton_project(f, Y, 0.0)
        for _ in range(maxiter):
            r = self.retract(Q) - Y
            if np.max(np.linalg.norm(r, axis=-1) / np.linalg.norm(Y, axis=-1)) < tol:
                return Q
            Q = newton_project(f, Q - r, 0.0)
        return Q

    def projection_piece(self, Y1):
        Y = weighted_scale(self.f, 1.0 / float(self.R), Y1)
        return weighted_scale(self.f, float(self.R), self.tubular_parameter(Y))

    def chart_map(self) -> ChartMap:
        """The graph piece as a map of the real chart (defined near F_0(1))."""
        return ChartMap.from_function(
            AMBIENT, AMBIENT, lambda p: to_reals(self.graph_piece(from_reals(p))), f"e1_R{self.R!r}"
        )


def reembedding_form(
    f: WeightedPolynomial, R: float, samples: int = 1000, seed: int = 0, sup_threshold: float = 0.1
) -> tuple[Reembedding, VerificationReport]:
    e1 = Reembedding(f, R)
    Q = sample_cone_band(f, samples, seed)
    disp = float(np.max(np.linalg.norm(e1.retract(Q) - Q, axis=-1)))
    if disp >= sup_threshold:
        raise ValueError(f"R={R}: sup displacement {disp} exceeds {sup_threshold}; R too small")
    rad = np.asarray(weighted_radius(f, Q))
    Rf = float(R)

    # (a) pieces agree on the overlaps, measured in the rescaled picture
    inner = rad <= e1.psi_lo
    outer = rad >= e1.psi_hi
    Y1 = weighted_scale(f, Rf, e1.retract(Q))
    G = e1.graph_piece(Q)
    agree_in = np.linalg.norm(G[inner] - e1.identity_piece(Y1[inner]), axis=-1) / Rf
    agree_out = np.linalg.norm(G[outer] - e1.projection_piece(Y1[outer]), axis=-1) / Rf
    agree = float(max(np.max(agree_in, initial=0.0), np.max(agree_out, initial=0.0)))

    # (b) beta* restricted to the graph, via pushed-forward complex frames of F_0
    beta, _ = ambient_forms()
    u1, u2 = kernel_basis(f.gradient(Q))
    pushed = []
    Zg = None
    for v in (u1, 1j * u1, u2, 1j * u2):
        Zg, dv = pushforward(e1.graph, Q, v)
        pushed.append(to_reals(dv))
    pf = restricted_pfaffian(beta, to_reals(Zg), pushed)
    min_pf = float(np.min(pf))
    worst = int(np.argmin(pf))

    # (c) Z/d Hopf equivariance
    t = 2.0 * math.pi / f.degree
    eq = float(np.max(np.abs(e1.graph_piece(hopf_action(f, t, Q)) - hopf_action(f, t, G)))) / Rf

    report = make_report(
        f"reembedding_{f.name}",
        "the interpolated graph is a symplectic submanifold agreeing with F_1 and F_0 on the overlaps",
        samples,
        max(agree, eq),
        1e-10,
        positive={"pfaffian_positive": min_pf > 0.0},
        details={
            "R": Rf,
            "sup_displacement": disp,
            "overlap_agreement": agree,
            "equivariance": eq,
            "min_pfaffian": min_pf,
            "worst_sample": worst,
            "inner_overlap_samples": int(np.sum(inner)),
            "outer_overlap_samples": int(np.sum(outer)),
        },
    )
    return e1, report


def certify_reembedding(
    f: WeightedPolynomial, radii=(2, 4, 8, 16, 32), samples: int = 1000, seed: int = 0, sup_threshold: float = 0.1
):
    """First R in radii whose re-embedding passes; the last attempted report otherwise."""
    last = None
    for R in radii:
        try:
            e1, rep = reembedding_form(f, R, samples, seed, sup_threshold)
        except ValueError as exc:
            last = make_report(
                f"reembedding_{f.name}", "re-embedding precondition", samples, float("inf"), 1e-10,
                details={"R": float(R), "error": str(exc)},
            )
            continue
        rep.details["radii_tried"] = [float(r) for r in radii[: radii.index(R) + 1]]
        if rep.passed:
            return e1, rep
        last = rep
    return None, last


# --- contact-form closeness (hypothesis of the stability route) ----------------------


def link_frame(f: WeightedPolynomial, P: np.ndarray) -> list[np.ndarray]:
    """Orthonormal complex 3-vectors spanning T N at link points P (batch)."""
    u1, u2 = kernel_basis(f.gradient(P))
    pn = P / np.linalg.norm(P, axis=-1)[:, None]
    return _span3([v - np.real(_hdot(pn, v))[:, None] * pn for v in (u1, 1j * u1, u2, 1j * u2)])


def contact_closeness(
    f: WeightedPolynomial,
    rhobars=(math.e**2, math.e**4, math.e**6, math.e**8),
    samples: int = 200,
    seed: int = 0,
    epsilon: float = 0.1,
) -> VerificationReport:
    """C^1 distance between lambda* pulled back to N along the end of F_1 and along the cone F_0.

    At level rhobar the end map P -> retraction of s.P onto F_1 (s = rhobar^{1/2},
    weighted dilation) is compared with the dilation P -> s.P itself; for E6 the
    latter pullback is rhobar * zeta_N. Both the 1-forms and their differentials
    are evaluated on orthonormal frames of T N, relative to the size of the cone
    side, and the sequence must decrease as rhobar grows.
    """
    P = sample_link_array(f, samples, seed)
    frame = link_frame(f, P)
    beta, lam = ambient_forms()
    pairs = ((0, 1), (0, 2), (1, 2))
    c0, c1 = [], []
    for rb in rhobars:
        tau = math.log(rb)
        s = math.exp(0.5 * tau)
        mapped, coned = [], []
        img = None
        for v in frame:
            img, dv = pushforward(lambda Z: end_to_ambient_array(f, Z, tau, 0.0, epsilon=epsilon), P, v)
            mapped.append(dv)
            coned.append(weighted_scale(f, s, v))
        cone = weighted_scale(f, s, P)
        pl = [np.asarray(lam.at(to_reals(img), [to_reals(dv)])) for dv in mapped]
        ql = [np.asarray(lam.at(to_reals(cone), [to_reals(dv)])) for dv in coned]
        pb = [np.asarray(beta.at(to_reals(img), [to_reals(mapped[i]), to_reals(mapped[j])])) for i, j in pairs]
        qb = [np.asarray(beta.at(to_reals(cone), [to_reals(coned[i]), to_reals(coned[j])])) for i, j in pairs]
        c0.append(float(max(np.max(np.abs(a - b)) for a, b in zip(pl, ql)) / max(np.max(np.abs(q)) for q in ql)))
        c1.append(float(max(np.max(np.abs(a - b)) for a, b in zip(pb, qb)) / max(np.max(np.abs(q)) for q in qb)))
    dist = [max(a, b) for a, b in zip(c0, c1)]
    decreasing = all(b < a for a, b in zip(dist, dist[1:]))
    return make_report(
        f"contact_closeness_{f.name}",
        "rescaled contact forms on F_1 levels approach zeta_N in C^1 as the level grows",
        samples,
        dist[-1],
        dist[0] if dist[0] > 0 else 1.0,
        positive={"decreasing": decreasing},
        details={"rhobars": [float(r) for r in rhobars], "c0_distance": c0, "c1_distance": c1},
    )
