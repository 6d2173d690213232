"""Chart-based exterior calculus with exact first derivatives.

Fields are plain Python callables on coordinate tuples. They are written with
the generic operators of :mod:`lawsonleaf.exterior.dual`, so the same code
evaluates on floats, numpy arrays of sample points, and dual numbers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import dual as D

MAX_DIM = 8


class StructureError(ValueError):
    """Operands live on different charts or have incompatible shapes."""


def _everywhere(point) -> bool:
    return True


@dataclass(frozen=True, eq=False)
class Chart:
    name: str
    coords: tuple[str, ...]
    domain: Callable = field(default=_everywhere, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        if not 1 <= len(self.coords) <= MAX_DIM:
            raise StructureError(f"chart dimension must be in [1, {MAX_DIM}]")
        if len(set(self.coords)) != len(self.coords):
            raise StructureError(f"duplicate coordinate names in {self.coords}")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def index(self, name: str) -> int:
        return self.coords.index(name)

    def contains(self, point) -> bool:
        return bool(np.all(self.domain(tuple(D.real_part(c) for c in point))))

    def coordinate(self, name_or_index) -> "ScalarField":
        i = name_or_index if isinstance(name_or_index, int) else self.index(name_or_index)
        return ScalarField(self, lambda p, i=i: p[i], label=self.coords[i])

    def d(self, name_or_index) -> "DifferentialForm":
        """The coordinate 1-form d(coordinate)."""
        i = name_or_index if isinstance(name_or_index, int) else self.index(name_or_index)
        return DifferentialForm(self, 1, {(i,): ScalarField.constant(self, 1.0)})

    def basis(self, name_or_index) -> list[float]:
        i = name_or_index if isinstance(name_or_index, int) else self.index(name_or_index)
        return [1.0 if j == i else 0.0 for j in range(self.dim)]


class ScalarField:
    """Smooth real function on a chart, evaluable on dual numbers.

    ``const`` is set for fields known to be constant; it keeps forms sparse
    and lets derivatives of constants vanish without evaluation.
    """

    __slots__ = ("chart", "fn", "const", "label")

    def __init__(self, chart: Chart, fn: Callable, const=None, label: str = ""):
        self.chart = chart
        self.fn = fn
        self.const = const
        self.label = label

    @classmethod
    def constant(cls, chart: Chart, value: float) -> "ScalarField":
        value = float(value)
        return cls(chart, lambda p, v=value: v, const=value, label=repr(value))

    def __repr__(self) -> str:
        return f"ScalarField({self.label or '<fn>'} on {self.chart.name})"

    def __call__(self, point):
        return self.fn(tuple(point))

    @property
    def is_zero(self) -> bool:
        return self.const == 0.0

    def partial(self, i: int) -> "ScalarField":
        if self.const is not None:
            return ScalarField.constant(self.chart, 0.0)
        fn = self.fn

        def deriv(p, fn=fn, i=i):
            tag = D.new_tag()
            q = list(p)
            q[i] = D.Dual(q[i], 1.0, tag)
            return D.infinitesimal(fn(tuple(q)), tag)

        return ScalarField(self.chart, deriv, label=f"d{self.chart.coords[i]}({self.label})")

    def gradient(self, point) -> list:
        return [self.partial(i)(point) for i in range(self.chart.dim)]

    def _check(self, other: "ScalarField"):
        if other.chart is not self.chart:
            raise StructureError(f"fields on {self.chart.name} and {other.chart.name}")

    def __add__(self, other):
        if not isinstance(other, ScalarField):
            other = ScalarField.constant(self.chart, other)
        self._check(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        if self.const is not None and other.const is not None:
            return ScalarField.constant(self.chart, self.const + other.const)
        f, g = self.fn, other.fn
        return ScalarField(self.chart, lambda p: f(p) + g(p), label=f"({self.label}+{other.label})")

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other if isinstance(other, ScalarField) else -float(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, ScalarField):
            other = ScalarField.constant(self.chart, other)
        self._check(other)
        if self.is_zero or other.is_zero:
            return ScalarField.constant(self.chart, 0.0)
        if self.const is not None and other.const is not None:
            return ScalarField.constant(self.chart, self.const * other.const)
        if self.const == 1.0:
            return other
        if other.const == 1.0:
            return self
        f, g = self.fn, other.fn
        return ScalarField(self.chart, lambda p: f(p) * g(p), label=f"{self.label}*{other.label}")

    __rmul__ = __mul__

    def compose(self, phi: "ChartMap") -> "ScalarField":
        """self o phi, a field on phi.source."""
        if phi.target is not self.chart:
            raise StructureError("composition target mismatch")
        if self.const is not None:
            return ScalarField.constant(phi.source, self.const)
        fn, comps = self.fn, [c.fn for c in phi.components]
        return ScalarField(
            phi.source, lambda p: fn(tuple(c(p) for c in comps)), label=f"{self.label}o{phi.name}"
        )


@dataclass(frozen=True)
class TangentVector:
    chart: Chart
    base: tuple
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "base", tuple(self.base))
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.base) != self.chart.dim or len(self.components) != self.chart.dim:
            raise StructureError("tangent vector length does not match chart dimension")
        if not self.chart.contains(self.base):
            raise StructureError(f"base point outside the domain of {self.chart.name}")


def _sort_sign(idx: Sequence[int]):
    """Sorted multi-index and permutation sign; sign 0 on a repeated index."""
    if len(set(idx)) != len(idx):
        return tuple(sorted(idx)), 0
    sign = 1
    arr = list(idx)
    for i in range(len(arr)):
        for j in range(len(arr) - 1 - i):
            if arr[j] > arr[j + 1]:
                arr[j], arr[j + 1] = arr[j + 1], arr[j]
                sign = -sign
    return tuple(arr), sign


def _det(rows):
    """Leibniz determinant of a small square matrix of generic entries."""
    k = len(rows)
    if k == 0:
        return 1.0
    if k == 1:
        return rows[0][0]
    if k == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    total = 0.0
    for perm in itertools.permutations(range(k)):
        _, sign = _sort_sign(perm)
        term = float(sign)
        for r, c in enumerate(perm):
            term = term * rows[r][c]
        total = total + term
    return total


class DifferentialForm:
    """Degree-k form stored sparsely by increasing multi-index."""

    __slots__ = ("chart", "degree", "coeffs")

    def __init__(self, chart: Chart, degree: int, coeffs: Mapping[tuple, ScalarField] | None = None):
        if degree < 0:
            raise StructureError("negative degree")
        self.chart = chart
        self.degree = degree
        clean: dict[tuple, ScalarField] = {}
        if degree <= chart.dim:
            for idx, c in (coeffs or {}).items():
                idx = tuple(idx)
                if len(idx) != degree or any(not 0 <= i < chart.dim for i in idx):
                    raise StructureError(f"bad multi-index {idx} for degree {degree}")
                if list(idx) != sorted(set(idx)):
                    raise StructureError(f"multi-index {idx} is not increasing")
                if c.chart is not chart:
                    raise StructureError("coefficient on a different chart")
                if not c.is_zero:
                    clean[idx] = c
        self.coeffs = dict(sorted(clean.items()))

    @classmethod
    def zero(cls, chart: Chart, degree: int) -> "DifferentialForm":
        return cls(chart, degree, {})

    @classmethod
    def function(cls, f: ScalarField) -> "DifferentialForm":
        return cls(f.chart, 0, {(): f})

    @classmethod
    def from_terms(cls, chart: Chart, degree: int, terms) -> "DifferentialForm":
        """Build from (coefficient, multi-index in any order) pairs, accumulating signs."""
        acc: dict[tuple, ScalarField] = {}
        for coef, idx in terms:
            if not isinstance(coef, ScalarField):
                coef = ScalarField.constant(chart, coef)
            key, sign = _sort_sign(idx)
            if sign == 0:
                continue
            term = coef if sign > 0 else -coef
            acc[key] = acc[key] + term if key in acc else term
        return cls(chart, degree, acc)

    def __repr__(self) -> str:
        terms = []
        for idx, c in self.coeffs.items():
            basis = "^".join("d" + self.chart.coords[i] for i in idx) or "1"
            terms.append(f"{c.label or '<fn>'} {basis}")
        return f"<{self.degree}-form on {self.chart.name}: " + (" + ".join(terms) or "0") + ">"

    def coefficient(self, idx) -> ScalarField:
        key, sign = _sort_sign(idx)
        c = self.coeffs.get(key)
        if c is None or sign == 0:
            return ScalarField.constant(self.chart, 0.0)
        return c if sign > 0 else -c

    def _check(self, other: "DifferentialForm"):
        if other.chart is not self.chart:
            raise StructureError(f"forms on {self.chart.name} and {other.chart.name}")

    def __add__(self, other: "DifferentialForm") -> "DifferentialForm":
        self._check(other)
        if other.degree != self.degree:
            raise StructureError("adding forms of different degree")
        acc = dict(self.coeffs)
        for idx, c in other.coeffs.items():
            acc[idx] = acc[idx] + c if idx in acc else c
        return DifferentialForm(self.chart, self.degree, acc)

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s) -> "DifferentialForm":
        """Multiply by a constant or by a ScalarField."""
        return DifferentialForm(self.chart, self.degree, {i: c * s for i, c in self.coeffs.items()})

    def __mul__(self, s):
        return self.scale(s)

    __rmul__ = __mul__

    def __xor__(self, other: "DifferentialForm") -> "DifferentialForm":
        return wedge(self, other)

    # --- evaluation -------------------------------------------------------

    def coefficient_values(self, point) -> dict:
        return {idx: c(point) for idx, c in self.coeffs.items()}

    def at(self, point, vectors: Sequence[Sequence]) -> object:
        """Value on raw component vectors at ``point`` (no TangentVector checks).

        Points and components may hold arrays, giving a vectorized sweep.
        """
        if len(vectors) != self.degree:
            raise StructureError(f"need {self.degree} vectors, got {len(vectors)}")
        total = 0.0
        for idx, c in self.coeffs.items():
            rows = [[v[i] for v in vectors] for i in idx]
            total = total + c(point) * _det(rows)
        return total


def wedge(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    a._check(b)
    deg = a.degree + b.degree
    if deg > a.chart.dim:
        return DifferentialForm.zero(a.chart, deg)
    terms = []
    for ia, ca in a.coeffs.items():
        for ib, cb in b.coeffs.items():
            if set(ia) & set(ib):
                continue
            terms.append((ca * cb, ia + ib))
    return DifferentialForm.from_terms(a.chart, deg, terms)


def exterior_derivative(a: DifferentialForm) -> DifferentialForm:
    if a.degree >= a.chart.dim:
        raise StructureError("exterior derivative of a top-degree form")
    terms = []
    for idx, c in a.coeffs.items():
        if c.const is not None:
            continue
        for j in range(a.chart.dim):
            if j in idx:
                continue
            terms.append((c.partial(j), (j,) + idx))
    return DifferentialForm.from_terms(a.chart, a.degree + 1, terms)


def interior(vector_field: Sequence[ScalarField], a: DifferentialForm) -> DifferentialForm:
    """Contraction of a vector field (list of component fields) into the first slot."""
    if a.degree == 0:
        raise StructureError("contraction into a 0-form")
    terms = []
    for idx, c in a.coeffs.items():
        for pos, i in enumerate(idx):
            comp = vector_field[i]
            if comp.is_zero:
                continue
            rest = idx[:pos] + idx[pos + 1 :]
            sign = -1.0 if pos % 2 else 1.0
            terms.append((c * comp * sign, rest))
    return DifferentialForm.from_terms(a.chart, a.degree - 1, terms)


def evaluate(a: DifferentialForm, vectors: Sequence[TangentVector]):
    if len(vectors) != a.degree:
        raise StructureError(f"need {a.degree} vectors, got {len(vectors)}")
    if a.degree == 0:
        raise StructureError("use the coefficient field to evaluate a 0-form")
    base = vectors[0].base
    for v in vectors:
        if v.chart is not a.chart:
            raise StructureError("vector on a different chart")
        if v.base != base:
            raise StructureError("vectors do not share a base point")
    return a.at(base, [v.components for v in vectors])


@dataclass(frozen=True, eq=False)
class ChartMap:
    source: Chart
    target: Chart
    components: tuple
    name: str = "phi"

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) != self.target.dim:
            raise StructureError("chart map needs one component per target coordinate")
        for c in self.components:
            if c.chart is not self.source:
                raise StructureError("chart map component not on the source chart")

    @classmethod
    def from_function(cls, source: Chart, target: Chart, fn: Callable, name: str = "phi"):
        """Build from fn(point) -> tuple of target coordinates."""
        comps = [
            ScalarField(source, lambda p, i=i: fn(p)[i], label=f"{name}[{i}]") for i in range(target.dim)
        ]
        return cls(source, target, comps, name)

    @classmethod
    def identity(cls, chart: Chart) -> "ChartMap":
        return cls(chart, chart, [chart.coordinate(i) for i in range(chart.dim)], "id")

    def __call__(self, point) -> tuple:
        p = tuple(point)
        return tuple(c.fn(p) for c in self.components)

    def then(self, psi: "ChartMap") -> "ChartMap":
        """psi o self."""
        if psi.source is not self.target:
            raise StructureError("composition mismatch")
        return ChartMap(self.source, psi.target, [c.compose(self) for c in psi.components], f"{psi.name}o{self.name}")

    def pushforward(self, point, vector: Sequence) -> list:
        """Differential of the map applied to a component vector, exact via one dual pass."""
        tag = D.new_tag()
        q = tuple(D.Dual(x, v, tag) for x, v in zip(point, vector))
        return [D.infinitesimal(c.fn(q), tag) for c in self.components]


def pullback(phi: ChartMap, a: DifferentialForm) -> DifferentialForm:
    if a.chart is not phi.target:
        raise StructureError("pullback: form is not on the map's target chart")
    src = phi.source
    if a.degree == 0:
        c = a.coeffs.get(())
        return DifferentialForm.function(c.compose(phi)) if c else DifferentialForm.zero(src, 0)
    dphi = [exterior_derivative(DifferentialForm.function(c)) for c in phi.components]
    out = DifferentialForm.zero(src, a.degree)
    for idx, c in a.coeffs.items():
        term = DifferentialForm.function(c.compose(phi))
        for i in idx:
            term = wedge(term, dphi[i])
        out = out + term
    return out


def pfaffian4(a: DifferentialForm, point, frame: Sequence[Sequence]):
    """Pfaffian of B_ij = a(frame_i, frame_j) for a 2-form on a 4-dimensional chart."""
    if a.degree != 2 or a.chart.dim != 4 or len(frame) != 4:
        raise StructureError("pfaffian4 needs a 2-form on a 4-chart and a 4-frame")
    return pfaffian4_matrix([[a.at(point, [u, v]) for v in frame] for u in frame])


def pfaffian4_matrix(b) -> object:
    return b[0][1] * b[2][3] - b[0][2] * b[1][3] + b[0][3] * b[1][2]


def finite_difference(f: ScalarField, point, i: int, h: float = 1e-5) -> float:
    """Central difference, kept only as an independent cross-check of dual derivatives."""
    p = list(point)
    q = list(point)
    p[i] = p[i] + h
    q[i] = q[i] - h
    return (f(p) - f(q)) / (2.0 * h)


def random_frame(rng: np.random.Generator, dim: int, k: int, n: int) -> list[list[np.ndarray]]:
    """k random component vectors, each a list of dim arrays of n samples."""
    return [[rng.standard_normal(n) for _ in range(dim)] for _ in range(k)]


def max_abs(value) -> float:
    return float(np.max(np.abs(D.real_part(value)))) if np.size(D.real_part(value)) else 0.0


def form_discrepancy(a: DifferentialForm, b: DifferentialForm, points) -> float:
    """Largest coefficient discrepancy between two forms over sample points."""
    a._check(b)
    if a.degree != b.degree:
        raise StructureError("comparing forms of different degree")
    worst = 0.0
    for idx in sorted(set(a.coeffs) | set(b.coeffs)):
        diff = np.asarray(a.coefficient(idx)(points)) - np.asarray(b.coefficient(idx)(points))
        worst = max(worst, float(np.max(np.abs(diff))))
    return worst


__all__ = [
    "Chart",
    "ChartMap",
    "DifferentialForm",
    "ScalarField",
    "StructureError",
    "TangentVector",
    "evaluate",
    "exterior_derivative",
    "finite_difference",
    "interior",
    "pfaffian4",
    "pfaffian4_matrix",
    "pullback",
    "form_discrepancy",
    "wedge",
]
