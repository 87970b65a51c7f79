"""Exact linear algebra over the field of rational-function expressions.

Dense Gauss-Jordan elimination with symbolic entries.  Pivot choices are
decided by the kernel's zero test; every pivot (and any denominator it
introduces) is recorded in a genericity ledger, so the results are valid at
generic points and the ledger exposes where they may degenerate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import sympy as sp

from .expr import (
    Expr,
    GenericityLedger,
    UnresolvedZeroError,
    ZeroKind,
    is_zero,
    normalize,
    to_text,
)

__all__ = [
    "ExprMatrix",
    "NotInSpan",
    "rref",
    "rank",
    "nullspace",
    "solve_membership",
]


@dataclass(frozen=True)
class ExprMatrix:
    entries: tuple[tuple[Expr, ...], ...]

    @staticmethod
    def from_rows(rows: Sequence[Sequence[object]]) -> "ExprMatrix":
        if not rows or not rows[0]:
            raise ValueError("matrix dimensions must be positive")
        width = len(rows[0])
        norm_rows = []
        for row in rows:
            if len(row) != width:
                raise ValueError("ragged rows")
            norm_rows.append(tuple(normalize(sp.sympify(v)) for v in row))
        return ExprMatrix(tuple(norm_rows))

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0])

    def row(self, i: int) -> tuple[Expr, ...]:
        return self.entries[i]

    def __getitem__(self, key: tuple[int, int]) -> Expr:
        i, j = key
        return self.entries[i][j]

    def __repr__(self) -> str:
        body = "; ".join(
            "[" + ", ".join(to_text(v) for v in row) + "]" for row in self.entries)
        return f"ExprMatrix({body})"


@dataclass(frozen=True)
class NotInSpan:
    """Certificate: a linear functional vanishing on the basis, not on the target."""

    functional: tuple[Expr, ...]
    value_on_target: Expr


def _decide_nonzero(e: Expr, probes: int) -> bool:
    status = is_zero(e, probes=probes)
    if status.kind is ZeroKind.UNRESOLVED:
        raise UnresolvedZeroError(
            f"cannot decide whether pivot candidate {to_text(e)} vanishes; "
            "supply a simpler presentation")
    return status.is_nonzero


def _eliminate(rows: list[list[Expr]], pivot_cols: range,
               ledger: GenericityLedger, probes: int) -> list[int]:
    """In-place Gauss-Jordan restricted to ``pivot_cols``; returns pivot columns."""
    n_rows = len(rows)
    pivots: list[int] = []
    r = 0
    for col in pivot_cols:
        if r >= n_rows:
            break
        pivot_row = None
        for i in range(r, n_rows):
            if rows[i][col] != 0 and _decide_nonzero(rows[i][col], probes):
                pivot_row = i
                break
        if pivot_row is None:
            continue
        rows[r], rows[pivot_row] = rows[pivot_row], rows[r]
        pivot = rows[r][col]
        ledger.assume_nonzero(sp.fraction(pivot)[0])
        rows[r] = [normalize(v / pivot, ledger) for v in rows[r]]
        for i in range(n_rows):
            if i == r:
                continue
            factor = rows[i][col]
            if factor == 0:
                continue
            rows[i] = [normalize(a - factor * b, ledger)
                       for a, b in zip(rows[i], rows[r])]
        pivots.append(col)
        r += 1
    return pivots


def rref(M: ExprMatrix, ledger: GenericityLedger | None = None,
         probes: int = 8) -> tuple[ExprMatrix, tuple[int, ...], GenericityLedger]:
    """Reduced row-echelon form at a generic point."""
    ledger = ledger if ledger is not None else GenericityLedger()
    rows = [list(row) for row in M.entries]
    pivots = _eliminate(rows, range(M.cols), ledger, probes)
    return ExprMatrix(tuple(tuple(r) for r in rows)), tuple(pivots), ledger


def rank(M: ExprMatrix, ledger: GenericityLedger | None = None,
         probes: int = 8) -> tuple[int, GenericityLedger]:
    _, pivots, ledger = rref(M, ledger, probes)
    return len(pivots), ledger


def nullspace(M: ExprMatrix, ledger: GenericityLedger | None = None,
              probes: int = 8) -> list[tuple[Expr, ...]]:
    """Basis of the right nullspace; empty when the kernel is trivial."""
    R, pivots, _ = rref(M, ledger, probes)
    free_cols = [j for j in range(M.cols) if j not in pivots]
    basis: list[tuple[Expr, ...]] = []
    for free in free_cols:
        v: list[Expr] = [sp.Integer(0)] * M.cols
        v[free] = sp.Integer(1)
        for i, col in enumerate(pivots):
            v[col] = normalize(-R[i, free])
        basis.append(tuple(v))
    return basis


def solve_membership(basis: Sequence[Sequence[object]],
                     target: Sequence[object],
                     ledger: GenericityLedger | None = None,
                     probes: int = 8) -> list[Expr] | NotInSpan:
    """Express ``target`` in the span of ``basis`` with exact coefficients.

    Vectors are given over a shared coordinate dimension.  On failure the
    certificate is a coordinate functional (row of the elimination operator)
    annihilating every basis vector but not the target.
    """
    if not basis:
        basis_dim = len(target)
        vectors = []
    else:
        basis_dim = len(basis[0])
        vectors = [list(b) for b in basis]
    if len(target) != basis_dim:
        raise ValueError("dimension mismatch between basis and target")
    ledger = ledger if ledger is not None else GenericityLedger()
    n = len(vectors)
    # columns: [basis | target | identity tracker]
    rows: list[list[Expr]] = []
    for i in range(basis_dim):
        row = [normalize(sp.sympify(vectors[k][i])) for k in range(n)]
        row.append(normalize(sp.sympify(target[i])))
        row.extend(sp.Integer(1) if j == i else sp.Integer(0)
                   for j in range(basis_dim))
        rows.append(row)
    pivots = _eliminate(rows, range(n), ledger, probes)
    pivot_of_col = {col: i for i, col in enumerate(pivots)}
    # any remaining row with a nonzero target entry certifies failure
    for i in range(len(rows)):
        if i < len(pivots):
            continue
        residual = rows[i][n]
        if residual != 0 and _decide_nonzero(residual, probes):
            functional = tuple(rows[i][n + 1:])
            return NotInSpan(functional=functional, value_on_target=residual)
    coeffs: list[Expr] = []
    for k in range(n):
        if k in pivot_of_col:
            coeffs.append(rows[pivot_of_col[k]][n])
        else:
            coeffs.append(sp.Integer(0))
    return coeffs
