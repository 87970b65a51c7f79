"""Distributions with dual presentations and their symmetry calculus.

A distribution carries tangent generators and, lazily, an independent set of
annihilating 1-forms.  Membership, involutivity and the two infinitesimal
symmetry criteria (form-side and bracket-side) are all decided exactly over
the rational-function field; genericity assumptions accumulate in the
distribution's ledger.

Symmetry checks run on generators only: both criteria are linear over smooth
functions in the distribution argument, so closure against a generating set
implies closure against every section.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import sympy as sp

from .expr import Expr, GenericityLedger, normalize
from .geometry import (
    Chart,
    ChartMismatchError,
    KForm,
    SmoothMap,
    VectorField,
    bracket,
    lie_derivative,
    one_form,
    pair,
    pullback,
    wedge,
)
from .linalg import ExprMatrix, NotInSpan, nullspace, rank, solve_membership

__all__ = [
    "Distribution",
    "SymmetryClass",
    "SymmetryClassKind",
    "InvolutivityWitness",
    "SymmetryWitness",
    "ComplementError",
    "annihilator",
    "coform_kernel",
    "contains_vf",
    "is_involutive",
    "is_symmetry_brackets",
    "is_symmetry_forms",
    "is_finite_symmetry",
    "classify",
    "reduce_mod",
]


class ComplementError(ValueError):
    pass


@dataclass
class Distribution:
    chart: Chart
    generators: tuple[VectorField, ...]
    ledger: GenericityLedger = field(default_factory=GenericityLedger)
    vertical_complement: tuple[int, ...] | None = None
    _coforms: tuple[KForm, ...] | None = None

    def __post_init__(self):
        self.generators = tuple(self.generators)
        for g in self.generators:
            if g.chart != self.chart:
                raise ChartMismatchError("generator lives on a different chart")
        m, _ = rank(self.generator_matrix(), self.ledger)
        if m != len(self.generators):
            raise ValueError("tangent generators are dependent at generic points")

    @staticmethod
    def from_generators(generators: Sequence[VectorField],
                        vertical_complement: Sequence[int] | None = None,
                        coforms: Sequence[KForm] | None = None) -> "Distribution":
        gens = tuple(generators)
        if not gens:
            raise ValueError("need at least one generator")
        return Distribution(
            chart=gens[0].chart,
            generators=gens,
            vertical_complement=tuple(vertical_complement) if vertical_complement else None,
            _coforms=tuple(coforms) if coforms is not None else None,
        )

    @staticmethod
    def from_coforms(forms: Sequence[KForm],
                     vertical_complement: Sequence[int] | None = None) -> "Distribution":
        gens = coform_kernel(forms)
        return Distribution(
            chart=forms[0].chart,
            generators=tuple(gens),
            vertical_complement=tuple(vertical_complement) if vertical_complement else None,
            _coforms=tuple(forms),
        )

    @property
    def dim(self) -> int:
        return len(self.generators)

    def generator_matrix(self) -> ExprMatrix:
        return ExprMatrix.from_rows([g.components for g in self.generators])

    @property
    def coforms(self) -> tuple[KForm, ...]:
        if self._coforms is None:
            self._coforms = tuple(annihilator(self))
        return self._coforms


def annihilator(D: Distribution) -> list[KForm]:
    """Independent 1-forms pairing to zero with every tangent generator."""
    kernel = nullspace(D.generator_matrix(), D.ledger)
    return [one_form(D.chart, vec) for vec in kernel]


def coform_kernel(forms: Sequence[KForm]) -> list[VectorField]:
    """Vector fields spanning the common kernel of independent 1-forms."""
    forms = list(forms)
    if not forms:
        raise ValueError("need at least one form")
    chart = forms[0].chart
    for f in forms:
        if f.degree != 1:
            raise ValueError("kernel computation expects 1-forms")
        if f.chart != chart:
            raise ChartMismatchError("forms live on different charts")
    rows = [[f.coefficient((j,)) for j in range(chart.dim)] for f in forms]
    kernel = nullspace(ExprMatrix.from_rows(rows))
    return [VectorField(chart, vec) for vec in kernel]


def contains_vf(D: Distribution, X: VectorField) -> list[Expr] | NotInSpan:
    """Exact coefficients of ``X`` against the generators, or a certificate."""
    if X.chart != D.chart:
        raise ChartMismatchError("vector field lives on a different chart")
    return solve_membership(
        [g.components for g in D.generators], X.components, D.ledger)


@dataclass(frozen=True)
class InvolutivityWitness:
    i: int
    j: int
    bracket: VectorField
    certificate: NotInSpan


def is_involutive(D: Distribution) -> tuple[bool, InvolutivityWitness | None]:
    """Frobenius test: closure of the generator set under Lie bracket."""
    for i in range(D.dim):
        for j in range(i + 1, D.dim):
            b = bracket(D.generators[i], D.generators[j])
            verdict = contains_vf(D, b)
            if isinstance(verdict, NotInSpan):
                return False, InvolutivityWitness(i, j, b, verdict)
    return True, None


@dataclass(frozen=True)
class SymmetryWitness:
    generator_index: int
    coform_index: int | None
    detail: object


def is_symmetry_brackets(D: Distribution,
                         X: VectorField) -> tuple[bool, SymmetryWitness | None]:
    """Bracket-side criterion: [X, generator] stays in the distribution."""
    for j, g in enumerate(D.generators):
        b = bracket(X, g)
        verdict = contains_vf(D, b)
        if isinstance(verdict, NotInSpan):
            return False, SymmetryWitness(j, None, b)
    return True, None


def is_symmetry_forms(D: Distribution,
                      X: VectorField) -> tuple[bool, SymmetryWitness | None]:
    """Form-side criterion: each annihilator form's Lie derivative kills D."""
    for i, omega in enumerate(D.coforms):
        derived = lie_derivative(X, omega)
        for j, g in enumerate(D.generators):
            residual = pair(derived, g)
            if residual != 0:
                return False, SymmetryWitness(j, i, residual)
    return True, None


def is_finite_symmetry(D: Distribution,
                       F: SmoothMap) -> tuple[bool, SymmetryWitness | None]:
    """Diffeomorphism criterion: pullbacks of annihilator forms stay in span.

    Cross-checked against the top-wedge criterion on small charts; the two
    must agree.
    """
    if F.source != D.chart or F.target != D.chart:
        raise ChartMismatchError("map must send the chart to itself")
    coforms = D.coforms
    coform_vectors = [[f.coefficient((j,)) for j in range(D.chart.dim)]
                      for f in coforms]
    verdict_membership: SymmetryWitness | None = None
    for i, omega in enumerate(coforms):
        pulled = pullback(F, omega)
        target = [pulled.coefficient((j,)) for j in range(D.chart.dim)]
        sol = solve_membership(coform_vectors, target, D.ledger)
        if isinstance(sol, NotInSpan):
            verdict_membership = SymmetryWitness(0, i, sol)
            break
    if D.chart.dim <= 7:
        big = coforms[0]
        for f in coforms[1:]:
            big = wedge(big, f)
        wedge_ok = True
        for i, omega in enumerate(coforms):
            pulled = pullback(F, omega)
            if not wedge(pulled, big).is_zero_form():
                wedge_ok = False
                break
        if wedge_ok != (verdict_membership is None):
            raise RuntimeError(
                "membership and wedge symmetry criteria disagree; "
                "genericity assumptions are suspect")
    return verdict_membership is None, verdict_membership


class SymmetryClassKind(Enum):
    CHARACTERISTIC = "characteristic"
    SHUFFLING = "shuffling"
    NOT_A_SYMMETRY = "not_a_symmetry"


@dataclass(frozen=True)
class SymmetryClass:
    kind: SymmetryClassKind
    representative: VectorField | None = None
    witness: SymmetryWitness | None = None


def reduce_mod(D: Distribution, X: VectorField,
               complement: Sequence[int]) -> VectorField:
    """Unique representative of ``X`` modulo the distribution supported on
    the complement coordinates."""
    if X.chart != D.chart:
        raise ChartMismatchError("vector field lives on a different chart")
    complement = tuple(complement)
    rows = [i for i in range(D.chart.dim) if i not in complement]
    basis = [[g.components[i] for i in rows] for g in D.generators]
    target = [X.components[i] for i in rows]
    sol = solve_membership(basis, target, D.ledger)
    if isinstance(sol, NotInSpan):
        raise ComplementError(
            "the complement is incompatible with the distribution: the "
            "restricted generator system does not reach the field")
    rep = X
    for c, g in zip(sol, D.generators):
        rep = rep - c * g
    for i in rows:
        if normalize(rep.components[i]) != 0:
            raise ComplementError(
                "restricted generator matrix is singular for this complement")
    return rep


def classify(D: Distribution, X: VectorField,
             complement: Sequence[int] | None = None) -> SymmetryClass:
    """Split a symmetry into characteristic vs shuffling, with witnesses."""
    ok, witness = is_symmetry_brackets(D, X)
    if not ok:
        return SymmetryClass(SymmetryClassKind.NOT_A_SYMMETRY, witness=witness)
    verdict = contains_vf(D, X)
    if not isinstance(verdict, NotInSpan):
        return SymmetryClass(SymmetryClassKind.CHARACTERISTIC)
    if complement is None:
        complement = D.vertical_complement
    if complement is None:
        raise ComplementError(
            "no complement declared for the shuffling representative")
    rep = reduce_mod(D, X, complement)
    return SymmetryClass(SymmetryClassKind.SHUFFLING, representative=rep)
