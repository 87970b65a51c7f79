"""Charts, vector fields, differential forms and the calculus between them.

Vector fields are component tuples against the coordinate frame; k-forms are
sparse maps from strictly increasing coordinate-index tuples to coefficients.
Everything is immutable and pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import sympy as sp

from .expr import Expr, normalize

__all__ = [
    "Chart",
    "VectorField",
    "KForm",
    "SmoothMap",
    "ChartMismatchError",
    "one_form",
    "coordinate_field",
    "pair",
    "bracket",
    "exterior_derivative",
    "interior_product",
    "lie_derivative",
    "wedge",
    "pullback",
]


class ChartMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Chart:
    coords: tuple[sp.Symbol, ...]

    def __post_init__(self):
        if len(set(self.coords)) != len(self.coords):
            raise ValueError("chart coordinates must be pairwise distinct")

    @staticmethod
    def of(*names: str) -> "Chart":
        return Chart(tuple(sp.Symbol(n) for n in names))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def index(self, coord: sp.Symbol) -> int:
        return self.coords.index(coord)

    def __iter__(self):
        return iter(self.coords)


def _require_same_chart(a, b) -> None:
    if a.chart != b.chart:
        raise ChartMismatchError(f"charts differ: {a.chart} vs {b.chart}")


@dataclass(frozen=True)
class VectorField:
    chart: Chart
    components: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.components) != self.chart.dim:
            raise ValueError("component count must equal the chart dimension")
        object.__setattr__(
            self, "components",
            tuple(normalize(sp.sympify(c)) for c in self.components))

    @staticmethod
    def zero(chart: Chart) -> "VectorField":
        return VectorField(chart, tuple(sp.Integer(0) for _ in chart.coords))

    def apply(self, e: Expr) -> Expr:
        """Act on a scalar as a derivation."""
        e = sp.sympify(e)
        return normalize(sp.Add(*[
            c * sp.diff(e, v) for c, v in zip(self.components, self.chart.coords)]))

    def is_zero_field(self) -> bool:
        return all(c == 0 for c in self.components)

    def __add__(self, other: "VectorField") -> "VectorField":
        _require_same_chart(self, other)
        return VectorField(self.chart, tuple(
            a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: "VectorField") -> "VectorField":
        return self + (-other)

    def __neg__(self) -> "VectorField":
        return VectorField(self.chart, tuple(-c for c in self.components))

    def __rmul__(self, scalar) -> "VectorField":
        scalar = sp.sympify(scalar)
        return VectorField(self.chart, tuple(scalar * c for c in self.components))


def coordinate_field(chart: Chart, coord: sp.Symbol) -> VectorField:
    i = chart.index(coord)
    comps = [sp.Integer(0)] * chart.dim
    comps[i] = sp.Integer(1)
    return VectorField(chart, tuple(comps))


@dataclass(frozen=True)
class KForm:
    chart: Chart
    degree: int
    terms: tuple[tuple[tuple[int, ...], Expr], ...]

    def __post_init__(self):
        if not 0 <= self.degree <= self.chart.dim:
            raise ValueError("degree out of range for the chart")
        cleaned: dict[tuple[int, ...], Expr] = {}
        for idx, coeff in self.terms:
            idx = tuple(idx)
            if len(idx) != self.degree or list(idx) != sorted(set(idx)):
                raise ValueError(f"index tuple {idx} is not strictly increasing "
                                 f"of length {self.degree}")
            coeff = normalize(sp.sympify(coeff))
            if coeff != 0:
                cleaned[idx] = cleaned.get(idx, sp.Integer(0)) + coeff
        object.__setattr__(
            self, "terms",
            tuple(sorted((i, normalize(c)) for i, c in cleaned.items() if c != 0)))

    @staticmethod
    def from_dict(chart: Chart, degree: int,
                  terms: Mapping[tuple[int, ...], object]) -> "KForm":
        return KForm(chart, degree, tuple((i, sp.sympify(c)) for i, c in terms.items()))

    @staticmethod
    def zero(chart: Chart, degree: int) -> "KForm":
        return KForm(chart, degree, ())

    def coefficient(self, idx: tuple[int, ...]) -> Expr:
        for i, c in self.terms:
            if i == tuple(idx):
                return c
        return sp.Integer(0)

    def is_zero_form(self) -> bool:
        return not self.terms

    def __add__(self, other: "KForm") -> "KForm":
        _require_same_chart(self, other)
        if self.degree != other.degree:
            raise ValueError("cannot add forms of different degree")
        acc: dict[tuple[int, ...], Expr] = dict(self.terms)
        for i, c in other.terms:
            acc[i] = acc.get(i, sp.Integer(0)) + c
        return KForm.from_dict(self.chart, self.degree, acc)

    def __sub__(self, other: "KForm") -> "KForm":
        return self + (-other)

    def __neg__(self) -> "KForm":
        return KForm(self.chart, self.degree,
                     tuple((i, -c) for i, c in self.terms))

    def __rmul__(self, scalar) -> "KForm":
        scalar = sp.sympify(scalar)
        return KForm(self.chart, self.degree,
                     tuple((i, scalar * c) for i, c in self.terms))

    def evaluate(self, *fields: VectorField) -> Expr:
        """Full contraction with ``degree`` vector fields."""
        if len(fields) != self.degree:
            raise ValueError("need exactly degree-many vector fields")
        for f in fields:
            _require_same_chart(self, f)
        total = sp.Integer(0)
        for idx, coeff in self.terms:
            minor = sp.Matrix([[f.components[i] for i in idx] for f in fields])
            total += coeff * minor.det()
        return normalize(total)


def one_form(chart: Chart, coefficients: Sequence[object]) -> KForm:
    if len(coefficients) != chart.dim:
        raise ValueError("coefficient count must equal the chart dimension")
    return KForm(chart, 1, tuple(
        ((i,), sp.sympify(c)) for i, c in enumerate(coefficients)))


def scalar_form(chart: Chart, value: object) -> KForm:
    return KForm(chart, 0, (((), sp.sympify(value)),))


def pair(omega: KForm, X: VectorField) -> Expr:
    """Contraction of a 1-form with a vector field."""
    if omega.degree != 1:
        raise ValueError("pair expects a 1-form")
    _require_same_chart(omega, X)
    return normalize(sp.Add(*[
        coeff * X.components[idx[0]] for idx, coeff in omega.terms]))


def bracket(X: VectorField, Y: VectorField) -> VectorField:
    _require_same_chart(X, Y)
    return VectorField(X.chart, tuple(
        X.apply(yc) - Y.apply(xc)
        for xc, yc in zip(X.components, Y.components)))


def _insert_index(idx: tuple[int, ...], j: int) -> tuple[int, tuple[int, ...]] | None:
    """Insert j into the increasing tuple idx; None when already present."""
    if j in idx:
        return None
    pos = sum(1 for i in idx if i < j)
    sign = -1 if pos % 2 else 1
    return sign, idx[:pos] + (j,) + idx[pos:]


def exterior_derivative(omega: KForm) -> KForm:
    if omega.degree >= omega.chart.dim:
        raise ValueError("cannot take d of a top-degree form")
    acc: dict[tuple[int, ...], Expr] = {}
    for idx, coeff in omega.terms:
        for j, v in enumerate(omega.chart.coords):
            partial = sp.diff(coeff, v)
            if partial == 0:
                continue
            ins = _insert_index(idx, j)
            if ins is None:
                continue
            sign, new_idx = ins
            acc[new_idx] = acc.get(new_idx, sp.Integer(0)) + sign * partial
    return KForm.from_dict(omega.chart, omega.degree + 1, acc)


def interior_product(X: VectorField, omega: KForm) -> KForm:
    if omega.degree == 0:
        raise ValueError("cannot contract a 0-form")
    _require_same_chart(X, omega)
    acc: dict[tuple[int, ...], Expr] = {}
    for idx, coeff in omega.terms:
        for pos, i in enumerate(idx):
            comp = X.components[i]
            if comp == 0:
                continue
            sign = -1 if pos % 2 else 1
            rest = idx[:pos] + idx[pos + 1:]
            acc[rest] = acc.get(rest, sp.Integer(0)) + sign * comp * coeff
    return KForm.from_dict(omega.chart, omega.degree - 1, acc)


def lie_derivative(X: VectorField, omega: KForm) -> KForm:
    """Derivative of ``omega`` along the flow of ``X`` (Cartan formula)."""
    _require_same_chart(X, omega)
    if omega.degree == 0:
        value = omega.coefficient(())
        return scalar_form(omega.chart, X.apply(value))
    part1 = interior_product(X, exterior_derivative(omega)) \
        if omega.degree < omega.chart.dim else KForm.zero(omega.chart, omega.degree)
    contracted = interior_product(X, omega)
    part2 = exterior_derivative(contracted)
    return part1 + part2


def wedge(a: KForm, b: KForm) -> KForm:
    _require_same_chart(a, b)
    degree = a.degree + b.degree
    if degree > a.chart.dim:
        return KForm.zero(a.chart, a.chart.dim)
    acc: dict[tuple[int, ...], Expr] = {}
    for ia, ca in a.terms:
        for ib, cb in b.terms:
            if set(ia) & set(ib):
                continue
            merged = tuple(sorted(ia + ib))
            # parity of the merge permutation: count inversions across the split
            inversions = sum(1 for x in ia for y in ib if x > y)
            sign = -1 if inversions % 2 else 1
            acc[merged] = acc.get(merged, sp.Integer(0)) + sign * ca * cb
    return KForm.from_dict(a.chart, degree, acc)


@dataclass(frozen=True)
class SmoothMap:
    source: Chart
    target: Chart
    components: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.components) != self.target.dim:
            raise ValueError("one component per target coordinate required")
        object.__setattr__(
            self, "components",
            tuple(normalize(sp.sympify(c)) for c in self.components))

    @staticmethod
    def identity(chart: Chart) -> "SmoothMap":
        return SmoothMap(chart, chart, chart.coords)

    def substitution(self) -> dict[sp.Symbol, Expr]:
        return dict(zip(self.target.coords, self.components))

    def compose(self, inner: "SmoothMap") -> "SmoothMap":
        """self after inner (source of self must be target of inner)."""
        if inner.target != self.source:
            raise ChartMismatchError("composition charts do not line up")
        sub = inner.substitution()
        return SmoothMap(inner.source, self.target,
                         tuple(normalize(c.xreplace(sub)) for c in self.components))


def pullback(F: SmoothMap, omega: KForm) -> KForm:
    """Pull a form on the target chart back along ``F``."""
    if omega.chart != F.target:
        raise ChartMismatchError("form does not live on the target chart")
    sub = F.substitution()
    differentials: dict[int, KForm] = {}

    def d_component(i: int) -> KForm:
        if i not in differentials:
            comp = F.components[i]
            differentials[i] = one_form(F.source, tuple(
                sp.diff(comp, v) for v in F.source.coords))
        return differentials[i]

    if omega.degree == 0:
        return scalar_form(F.source, omega.coefficient(()).xreplace(sub))
    result = KForm.zero(F.source, omega.degree)
    for idx, coeff in omega.terms:
        term: KForm | None = None
        for i in idx:
            term = d_component(i) if term is None else wedge(term, d_component(i))
            if term.is_zero_form():
                break
        if term is None or term.is_zero_form():
            continue
        pulled_coeff = normalize(coeff.xreplace(sub))
        result = result + pulled_coeff * term
    return result
