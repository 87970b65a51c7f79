"""Symmetry ansätze, determining equations and Lie-series flows."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import sympy as sp
from sympy.core.function import AppliedUndef

from .expr import (
    CollectError,
    Expr,
    ZeroStatus,
    collect_terms,
    is_zero,
    normalize,
    substitute,
    to_text,
)
from .geometry import Chart, SmoothMap, VectorField, lie_derivative, pair
from .distribution import Distribution

__all__ = [
    "SymmetryAnsatz",
    "DeterminingEquation",
    "DeterminingSystem",
    "FlowMap",
    "determining_equations",
    "verify_candidate",
    "lie_series_flow",
    "flow_as_map",
]


@dataclass(frozen=True)
class SymmetryAnsatz:
    """Vector field whose coefficients may be undetermined functions.

    Each coefficient is either a concrete expression or a pair
    ``(name, args)`` declaring an undetermined function of the listed chart
    coordinates.
    """

    chart: Chart
    coefficients: tuple[object, ...]

    def __post_init__(self):
        if len(self.coefficients) != self.chart.dim:
            raise ValueError("one coefficient per chart coordinate required")
        for c in self.coefficients:
            if isinstance(c, tuple):
                _, args = c
                for a in args:
                    if a not in self.chart.coords:
                        raise ValueError(f"argument {a} is not a chart coordinate")

    def unknowns(self) -> dict[str, tuple[sp.Symbol, ...]]:
        out: dict[str, tuple[sp.Symbol, ...]] = {}
        for c in self.coefficients:
            if isinstance(c, tuple):
                name, args = c
                out[name] = tuple(args)
        return out

    def realize(self) -> VectorField:
        comps = []
        for c in self.coefficients:
            if isinstance(c, tuple):
                name, args = c
                comps.append(sp.Function(name)(*args))
            else:
                comps.append(sp.sympify(c))
        return VectorField(self.chart, tuple(comps))


@dataclass(frozen=True)
class DeterminingEquation:
    coform_index: int
    generator_index: int
    monomial: Expr
    expression: Expr


@dataclass(frozen=True)
class DeterminingSystem:
    equations: tuple[DeterminingEquation, ...]
    unknowns: tuple[tuple[str, tuple[sp.Symbol, ...]], ...]

    def __len__(self) -> int:
        return len(self.equations)

    def is_empty(self) -> bool:
        return not self.equations

    def serialize(self) -> str:
        lines = [
            f"({eq.coform_index},{eq.generator_index},{to_text(eq.monomial)}): "
            f"{to_text(eq.expression)}"
            for eq in self.equations
        ]
        return "\n".join(lines)


def determining_equations(D: Distribution,
                          ansatz: SymmetryAnsatz) -> DeterminingSystem:
    """Conditions for the ansatz to be an infinitesimal symmetry of ``D``.

    Every annihilator form is Lie-differentiated along the realized field and
    paired with every tangent generator; the results are split by monomials
    in the chart coordinates that appear in no undetermined argument list.
    """
    if ansatz.chart != D.chart:
        raise ValueError("ansatz lives on a different chart")
    Z = ansatz.realize()
    unknowns = ansatz.unknowns()
    used = set()
    for args in unknowns.values():
        used.update(args)
    collectable = [c for c in D.chart.coords if c not in used]
    equations: list[DeterminingEquation] = []
    for i, omega in enumerate(D.coforms):
        derived = lie_derivative(Z, omega)
        for j, g in enumerate(D.generators):
            residual = normalize(pair(derived, g))
            if residual == 0:
                continue
            try:
                pieces = collect_terms(residual, collectable)
            except CollectError as exc:
                raise CollectError(
                    f"cannot split pairing ({i},{j}) by monomials: {exc}"
                ) from exc
            for monomial, coeff in pieces:
                coeff = normalize(coeff)
                if coeff != 0:
                    equations.append(DeterminingEquation(i, j, monomial, coeff))
    equations.sort(key=lambda e: (e.coform_index, e.generator_index,
                                  to_text(e.monomial)))
    return DeterminingSystem(tuple(equations), tuple(sorted(unknowns.items())))


def verify_candidate(system: DeterminingSystem,
                     bindings: Mapping[str, tuple[Sequence[sp.Symbol], object]],
                     probes: int = 8) -> list[ZeroStatus]:
    """Substitute concrete functions for the unknowns, report residual status
    per equation (candidate accepted iff every status is zero)."""
    for name, _ in system.unknowns:
        if name not in bindings:
            raise KeyError(f"no binding for undetermined function {name}")
    subs = {sp.Function(name): (tuple(args), sp.sympify(body))
            for name, (args, body) in bindings.items()}
    statuses: list[ZeroStatus] = []
    for eq in system.equations:
        residual = substitute(eq.expression, subs)
        statuses.append(is_zero(residual, probes=probes))
    return statuses


@dataclass(frozen=True)
class FlowMap:
    """Coordinate-wise exponential of a vector field in a flow parameter.

    ``components[i]`` is polynomial in the parameter when ``exact`` is set;
    otherwise the series is truncated at ``order``.
    """

    chart: Chart
    parameter: sp.Symbol
    components: tuple[Expr, ...]
    exact: bool
    order: int
    generator: VectorField

    def component(self, coord: sp.Symbol) -> Expr:
        return self.components[self.chart.index(coord)]

    def series_coefficient(self, coord: sp.Symbol, k: int) -> Expr:
        e = sp.expand(self.component(coord))
        return normalize(e.coeff(self.parameter, k))


def lie_series_flow(X: VectorField, max_order: int = 12,
                    parameter: str = "s") -> FlowMap:
    """Exponentiate ``X`` on the coordinate functions.

    Each coordinate maps to sum over k of parameter^k / k! times the k-fold
    derivation power of ``X`` applied to the coordinate.  The flow is exact
    when the iteration terminates at or below ``max_order``.
    """
    if max_order < 1:
        raise ValueError("max_order must be at least 1")
    s = sp.Symbol(parameter)
    if s in X.chart.coords:
        s = sp.Symbol("_" + parameter)
    terms: list[Expr] = list(X.chart.coords)
    series: list[Expr] = list(X.chart.coords)
    exact = False
    top = 0
    for k in range(1, max_order + 1):
        terms = [normalize(X.apply(tm)) if tm != 0 else sp.Integer(0)
                 for tm in terms]
        if all(tm == 0 for tm in terms):
            exact = True
            break
        top = k
        factor = s ** k / sp.factorial(k)
        series = [acc + factor * tm for acc, tm in zip(series, terms)]
    return FlowMap(
        chart=X.chart,
        parameter=s,
        components=tuple(sp.expand(c) for c in series),
        exact=exact,
        order=top,
        generator=X,
    )


def flow_as_map(fl: FlowMap, s_value: object) -> SmoothMap:
    """Freeze the flow parameter into a self-map of the chart."""
    value = sp.sympify(s_value)
    comps = tuple(normalize(c.subs(fl.parameter, value)) for c in fl.components)
    return SmoothMap(fl.chart, fl.chart, comps)
