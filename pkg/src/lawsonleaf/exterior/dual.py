"""Tagged forward-mode dual numbers.

A :class:`Dual` carries a value and one infinitesimal part. Components may be
floats, complex numbers, numpy arrays or lower-level duals, so nesting gives
exact higher derivatives and array components give vectorized sweeps.

Each differentiation pass draws a fresh tag; when two duals with different
tags meet, the higher tag is the outer perturbation and the other operand is
treated as a constant at that level. This avoids perturbation confusion in
nested passes.
"""

from __future__ import annotations

import itertools

import numpy as np

_tag_counter = itertools.count(1)


def new_tag() -> int:
    return next(_tag_counter)


def _level(x) -> int:
    return x.tag if isinstance(x, Dual) else 0


def _parts(x, tag):
    if isinstance(x, Dual) and x.tag == tag:
        return x.re, x.du
    return x, 0.0


class Dual:
    """Value ``re`` plus infinitesimal ``du`` at perturbation level ``tag``."""

    __slots__ = ("re", "du", "tag")
    # keep numpy from broadcasting over Dual objects; it defers to our operators
    __array_ufunc__ = None

    def __init__(self, re, du, tag: int):
        self.re = re
        self.du = du
        self.tag = tag

    def __repr__(self) -> str:
        return f"Dual({self.re!r}, {self.du!r}, tag={self.tag})"

    def __add__(self, other):
        t = max(self.tag, _level(other))
        a, da = _parts(self, t)
        b, db = _parts(other, t)
        return Dual(a + b, da + db, t)

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        t = max(self.tag, _level(other))
        a, da = _parts(self, t)
        b, db = _parts(other, t)
        return Dual(a - b, da - db, t)

    def __rsub__(self, other):
        t = max(self.tag, _level(other))
        a, da = _parts(self, t)
        b, db = _parts(other, t)
        return Dual(b - a, db - da, t)

    def __mul__(self, other):
        t = max(self.tag, _level(other))
        a, da = _parts(self, t)
        b, db = _parts(other, t)
        return Dual(a * b, da * b + a * db, t)

    def __rmul__(self, other):
        t = max(self.tag, _level(other))
        a, da = _parts(self, t)
        b, db = _parts(other, t)
        return Dual(b * a, db * a + b * da, t)

    def __truediv__(self, other):
        t = max(self.tag, _level(other))
        a, da = _parts(self, t)
        b, db = _parts(other, t)
        q = a / b
        return Dual(q, (da - q * db) / b, t)

    def __rtruediv__(self, other):
        t = max(self.tag, _level(other))
        a, da = _parts(self, t)
        b, db = _parts(other, t)
        q = b / a
        return Dual(q, (db - q * da) / a, t)

    def __neg__(self):
        return Dual(-self.re, -self.du, self.tag)

    def __pos__(self):
        return self

    def __pow__(self, n):
        if isinstance(n, Dual) or not float(n).is_integer():
            return exp(n * log(self))
        n = int(n)
        if n == 0:
            return Dual(self.re**0, 0.0, self.tag)
        return Dual(self.re**n, n * self.re ** (n - 1) * self.du, self.tag)

    def __getitem__(self, idx):
        du = self.du
        if isinstance(du, (np.ndarray, Dual)):
            du = du[idx]
        return Dual(self.re[idx], du, self.tag)

    def conjugate(self):
        return conj(self)


# --- value inspection ----------------------------------------------------


def real_part(x):
    """Strip every infinitesimal layer and return the plain value."""
    while isinstance(x, Dual):
        x = x.re
    return x


def infinitesimal(x, tag: int):
    """Coefficient of the level-``tag`` infinitesimal in ``x`` (0.0 if absent)."""
    if isinstance(x, Dual):
        if x.tag == tag:
            return x.du
        if x.tag > tag:
            # outer layers pass through: d/d(inner) commutes with them
            return Dual(infinitesimal(x.re, tag), infinitesimal(x.du, tag), x.tag)
    return 0.0


def seed(x, direction, tag: int) -> Dual:
    return Dual(x, direction, tag)


# --- elementary functions -------------------------------------------------


def exp(x):
    if isinstance(x, Dual):
        e = exp(x.re)
        return Dual(e, x.du * e, x.tag)
    return np.exp(x)


def log(x):
    if isinstance(x, Dual):
        return Dual(log(x.re), x.du / x.re, x.tag)
    return np.log(x)


def sqrt(x):
    if isinstance(x, Dual):
        s = sqrt(x.re)
        return Dual(s, x.du / (2.0 * s), x.tag)
    return np.sqrt(x)


def sin(x):
    if isinstance(x, Dual):
        return Dual(sin(x.re), x.du * cos(x.re), x.tag)
    return np.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(cos(x.re), -x.du * sin(x.re), x.tag)
    return np.cos(x)


def atan2(y, x):
    t = max(_level(y), _level(x))
    if t == 0:
        return np.arctan2(y, x)
    a, da = _parts(y, t)
    b, db = _parts(x, t)
    return Dual(atan2(a, b), (b * da - a * db) / (a * a + b * b), t)


def conj(x):
    if isinstance(x, Dual):
        return Dual(conj(x.re), conj(x.du), x.tag)
    return np.conj(x)


def real(x):
    if isinstance(x, Dual):
        return Dual(real(x.re), real(x.du), x.tag)
    return np.real(x)


def imag(x):
    if isinstance(x, Dual):
        return Dual(imag(x.re), imag(x.du), x.tag)
    return np.imag(x)


def abs2(x):
    """|x|^2 for real or complex x."""
    return real(x * conj(x))


def where(cond, a, b):
    """Elementwise select; ``cond`` is a plain boolean (array)."""
    t = max(_level(a), _level(b))
    if t == 0:
        return np.where(cond, a, b)
    ar, ad = _parts(a, t)
    br, bd = _parts(b, t)
    return Dual(where(cond, ar, br), where(cond, ad, bd), t)


def clip(x, lo, hi):
    if isinstance(x, Dual):
        v = real_part(x.re)
        inside = (v > lo) & (v < hi)
        return Dual(clip(x.re, lo, hi), where(inside, x.du, 0.0), x.tag)
    return np.clip(x, lo, hi)


def stack(items, axis=-1):
    t = max(_level(v) for v in items)
    if t == 0:
        return np.stack(np.broadcast_arrays(*items), axis=axis)
    res, dus = zip(*(_parts(v, t) for v in items))
    return Dual(stack(list(res), axis), stack(list(dus), axis), t)


def total(x, axis=-1):
    if isinstance(x, Dual):
        du = x.du
        if isinstance(du, (np.ndarray, Dual)):
            du = total(du, axis)
        return Dual(total(x.re, axis), du, x.tag)
    return np.sum(x, axis=axis)


# --- smooth step primitive ------------------------------------------------

_EXP_CAP = 700.0


def _step_core(t):
    # 1 / (1 + e^{1/t - 1/(1-t)}) on the open interval, t already kept inside
    u = clip(1.0 / t - 1.0 / (1.0 - t), -_EXP_CAP, _EXP_CAP)
    return 1.0 / (1.0 + exp(u))


def step(t):
    """C^infinity step: 0 for t <= 0, 1 for t >= 1, e^{-1/t}/(e^{-1/t}+e^{-1/(1-t)}) between.

    The dual rule is hand-coded via :func:`step_prime` rather than traced
    through the piecewise formula.
    """
    if isinstance(t, Dual):
        return Dual(step(t.re), t.du * step_prime(t.re), t.tag)
    v = real_part(t)
    inside = (v > 0.0) & (v < 1.0)
    ts = np.where(inside, v, 0.5)
    s = _step_core(ts)
    return np.where(v >= 1.0, 1.0, np.where(inside, s, 0.0))


def step_prime(t):
    """Derivative of :func:`step`; itself dual-evaluable."""
    v = real_part(t)
    inside = (v > 0.0) & (v < 1.0)
    ts = where(inside, t, 0.5)
    s = step(ts)
    # 1 - s recomputed as step(1 - t): no cancellation near the ends
    d = s * step(1.0 - ts) * (1.0 / (ts * ts) + 1.0 / ((1.0 - ts) * (1.0 - ts)))
    return where(inside, d, 0.0)
