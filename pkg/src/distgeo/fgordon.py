"""Model builders and the numeric harness for the u_xy = F(x,y,u,u_x,u_y) family.

Charts follow the second-jet convention: p = u_x, q = u_y, r = u_xx,
t = u_yy, with the mixed slot eliminated through the equation itself, so the
model lives on the seven coordinates (x, y, u, p, q, r, t).  The same letter
``s`` that jet notation would use for the mixed slot is reused as the flow
parameter; the two never meet in one expression.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy as sp

from .expr import Expr, GenericityLedger, normalize, to_text
from .geometry import (
    Chart,
    KForm,
    SmoothMap,
    VectorField,
    coordinate_field,
    one_form,
)
from .distribution import Distribution
from .symmetry import FlowMap, SymmetryAnsatz

__all__ = [
    "X", "Y", "U", "P", "Q", "R", "T",
    "JET_CHART",
    "CartanModel",
    "FGordonModel",
    "KleinGordonInstance",
    "SolutionGrid",
    "TransportReport",
    "cartan_model",
    "fgordon_model",
    "klein_gordon",
    "kg_from_physical",
    "point_ansatz",
    "graph_map",
    "eq21_residual",
    "shuffle_representative",
    "linearized_residual",
    "transport_solution",
    "integrate_flow_numeric",
]

x, y, u, p, q, r, t = sp.symbols("x y u p q r t")
JET_CHART = Chart((x, y, u, p, q, r, t))

# undetermined coefficient functions of the point-transformation ansatz
X, Y, U, P, Q, R, T = (sp.Function(n) for n in "XYUPQRT")


# ---------------------------------------------------------------------------
# Models

@dataclass(frozen=True)
class CartanModel:
    """First-order presentation of a k-th order ODE as a line field."""

    k: int
    rhs: Expr
    chart: Chart
    distribution: Distribution
    coforms: tuple[KForm, ...]

    @property
    def field(self) -> VectorField:
        return self.distribution.generators[0]


def cartan_model(k: int, rhs: object) -> CartanModel:
    if k < 1:
        raise ValueError("order k must be at least 1")
    rhs = sp.sympify(rhs)
    coords = [x] + [sp.Symbol(f"p{i}") for i in range(k)]
    chart = Chart(tuple(coords))
    for s_ in rhs.free_symbols:
        m = re.fullmatch(r"p(\d+)", s_.name)
        if m and int(m.group(1)) >= k:
            raise ValueError(f"right-hand side may not involve {s_}")
    comps = [sp.Integer(1)] + [coords[i + 2] for i in range(k - 1)] + [rhs]
    field_ = VectorField(chart, tuple(comps))
    coforms = []
    for i in range(k):
        coeffs = [sp.Integer(0)] * (k + 1)
        coeffs[0] = -(coords[i + 2] if i < k - 1 else rhs)
        coeffs[i + 1] = sp.Integer(1)
        coforms.append(one_form(chart, coeffs))
    dist = Distribution.from_generators(
        [field_], vertical_complement=tuple(range(1, k + 1)),
        coforms=coforms)
    return CartanModel(k, normalize(rhs), chart, dist, tuple(coforms))


@dataclass(frozen=True)
class FGordonModel:
    rhs: Expr
    chart: Chart
    distribution: Distribution
    coforms: tuple[KForm, ...]

    @property
    def generators(self) -> tuple[VectorField, ...]:
        return self.distribution.generators


def fgordon_model(rhs: object) -> FGordonModel:
    """Distribution of the PDE u_xy = rhs(x, y, u, u_x, u_y) on the 7-chart.

    Free symbols of the right-hand side outside (x, y, u, p, q) are treated
    as parameters, except the jet coordinates r and t which are rejected.
    """
    rhs = sp.sympify(rhs)
    if rhs.free_symbols & {r, t}:
        raise ValueError("right-hand side may only depend on x, y, u, p, q")
    X1 = VectorField(JET_CHART, (1, 0, p, r, rhs, 0, 0))
    X2 = VectorField(JET_CHART, (0, 1, q, rhs, t, 0, 0))
    Dr = coordinate_field(JET_CHART, r)
    Dt = coordinate_field(JET_CHART, t)
    w1 = one_form(JET_CHART, (-p, -q, 1, 0, 0, 0, 0))
    w2 = one_form(JET_CHART, (-r, -rhs, 0, 1, 0, 0, 0))
    w3 = one_form(JET_CHART, (-rhs, -t, 0, 0, 1, 0, 0))
    dist = Distribution.from_generators(
        [X1, X2, Dr, Dt],
        vertical_complement=(2, 3, 4),
        coforms=(w1, w2, w3))
    return FGordonModel(normalize(rhs), JET_CHART, dist, (w1, w2, w3))


def point_ansatz() -> SymmetryAnsatz:
    """Point transformation in (x, y, u) with free jet-level corrections."""
    base = (x, y, u)
    full = JET_CHART.coords
    return SymmetryAnsatz(JET_CHART, (
        ("X", base), ("Y", base), ("U", base),
        ("P", full), ("Q", full), ("R", full), ("T", full)))


Bindings = dict[str, tuple[tuple[sp.Symbol, ...], Expr]]


def _point_bindings(xc, yc, uc, pc, qc, rc, tc) -> Bindings:
    base = (x, y, u)
    full = JET_CHART.coords
    return {
        "X": (base, sp.sympify(xc)), "Y": (base, sp.sympify(yc)),
        "U": (base, sp.sympify(uc)),
        "P": (full, sp.sympify(pc)), "Q": (full, sp.sympify(qc)),
        "R": (full, sp.sympify(rc)), "T": (full, sp.sympify(tc)),
    }


@dataclass(frozen=True)
class KleinGordonInstance:
    """The cubic instance u_xy = a u + b u^3 with its symmetry generators.

    ``x1``, ``x2``, ``x3`` are the classical vertical generator fields in
    their conventional form; note their source term u^2*(a + b*u) differs
    from the model right-hand side a*u + b*u^3 that the representative
    formula produces (see ``shuffle_representative``).  ``candidate_bindings``
    are
    the point-symmetry data used to verify each generator against the raw
    determining system; ``x1`` gets both sign variants.
    """

    a: Expr
    b: Expr
    model: FGordonModel
    x1: VectorField
    x2: VectorField
    x3: VectorField
    candidate_bindings: dict[str, tuple[Bindings, ...]]


def klein_gordon(a: object, b: object) -> KleinGordonInstance:
    a = sp.sympify(a)
    b = sp.sympify(b)
    model = fgordon_model(a * u + b * u ** 3)
    g = u ** 2 * (a + b * u)
    x1_ = VectorField(JET_CHART, (
        0, 0, p * x - q * y, -(p + y * g - r * x), q + x * g - t * y, 0, 0))
    x2_ = VectorField(JET_CHART, (0, 0, q, g, t, 0, 0))
    x3_ = VectorField(JET_CHART, (0, 0, p, r, g, 0, 0))
    bindings = {
        "X1": (_point_bindings(x, -y, 0, -p, q, -2 * r, 2 * t),
               _point_bindings(-x, y, 0, p, -q, 2 * r, -2 * t)),
        "X2": (_point_bindings(0, -1, 0, 0, 0, 0, 0),),
        "X3": (_point_bindings(-1, 0, 0, 0, 0, 0, 0),),
    }
    return KleinGordonInstance(a, b, model, x1_, x2_, x3_, bindings)


def kg_from_physical(alpha: object, beta: object, gamma: object,
                     ledger: GenericityLedger | None = None) -> tuple[Expr, Expr]:
    """Light-cone parameter map for u_tt - alpha^2 u_xx + gamma^2 u = beta u^3."""
    alpha = sp.sympify(alpha)
    beta = sp.sympify(beta)
    gamma = sp.sympify(gamma)
    if alpha == 0:
        raise ValueError("alpha must be nonzero")
    if ledger is not None:
        ledger.assume_nonzero(alpha)
    return (normalize(-((gamma / alpha) ** 2)), normalize(beta / alpha ** 2))


def graph_map(h: object) -> SmoothMap:
    """Prolonged graph of u = h(x, y) into the 7-chart."""
    h = sp.sympify(h)
    base = Chart((x, y))
    return SmoothMap(base, JET_CHART, (
        x, y, h, sp.diff(h, x), sp.diff(h, y),
        sp.diff(h, x, x), sp.diff(h, y, y)))


# ---------------------------------------------------------------------------
# Point-symmetry compatibility equation and representatives

def _check_point_coefficients(*coeffs: Expr) -> None:
    for c in coeffs:
        stray = c.free_symbols & {p, q, r, t}
        if stray:
            raise ValueError(
                f"point coefficient {to_text(c)} may only depend on x, y, u "
                f"(found {sorted(s.name for s in stray)})")


def eq21_residual(F: object, Xc: object, Yc: object, Uc: object) -> Expr:
    """Master compatibility condition on the point coefficients (X, Y, U).

    Vanishes identically exactly when (X, Y, U) extends to a point symmetry
    of u_xy = F; fully expanded left side minus right side.
    """
    F = sp.sympify(F)
    Xc, Yc, Uc = sp.sympify(Xc), sp.sympify(Yc), sp.sympify(Uc)
    _check_point_coefficients(Xc, Yc, Uc)
    Fx, Fy, Fu, Fp, Fq = (sp.diff(F, v) for v in (x, y, u, p, q))
    res = (
        (p * Fp - F) * sp.diff(Xc, x)
        + p * (p * Fp - 2 * F) * sp.diff(Xc, u)
        + (q * Fq - F) * sp.diff(Yc, y)
        + q * (q * Fq - 2 * F) * sp.diff(Yc, u)
        - Fp * sp.diff(Uc, x)
        - Fq * sp.diff(Uc, y)
        + (F - p * Fp - q * Fq) * sp.diff(Uc, u)
        + sp.diff(Uc, x, y) + q * sp.diff(Uc, x, u)
        + p * sp.diff(Uc, y, u) + p * q * sp.diff(Uc, u, u)
        - Xc * Fx - Yc * Fy - Uc * Fu
    )
    return normalize(res)


def shuffle_representative(F: object, Xc: object, Yc: object, Uc: object,
                           ledger: GenericityLedger | None = None) -> VectorField:
    """Vertical representative of the point symmetry (X, Y, U) modulo the
    distribution; the q-slot formula divides by p (recorded as generic)."""
    F = sp.sympify(F)
    Xc, Yc, Uc = sp.sympify(Xc), sp.sympify(Yc), sp.sympify(Uc)
    _check_point_coefficients(Xc, Yc, Uc)
    if ledger is not None:
        ledger.assume_nonzero(p)
    Xx, Xu = sp.diff(Xc, x), sp.diff(Xc, u)
    Xy = sp.diff(Xc, y)
    Yx, Yy, Yu = sp.diff(Yc, x), sp.diff(Yc, y), sp.diff(Yc, u)
    Ux, Uy, Uu = sp.diff(Uc, x), sp.diff(Uc, y), sp.diff(Uc, u)
    Pc = -p * Xx - p ** 2 * Xu - q * Yx - p * q * Yu + Ux + p * Uu
    Qc = (p * q * Xx - p ** 2 * Xy + q ** 2 * Yx - p * q * Yy
          - q * Ux + p * Uy + q * Pc) / p
    return VectorField(JET_CHART, (
        0, 0,
        Uc - p * Xc - q * Yc,
        Pc - r * Xc - F * Yc,
        Qc - F * Xc - t * Yc,
        0, 0))


# ---------------------------------------------------------------------------
# Numeric harness

@dataclass(frozen=True)
class SolutionGrid:
    """Rectangular sample of a candidate solution with its 2-jet.

    When built from a closed-form expression the exact partials are kept and
    residual evaluation is noise-free; otherwise central differences are
    used on interior points.
    """

    xs: np.ndarray
    ys: np.ndarray
    samples: dict[str, np.ndarray]
    closed_form: Expr | None = None

    def __post_init__(self):
        if len(self.xs) < 5 or len(self.ys) < 5:
            raise ValueError("grid needs at least 5 points per direction")

    @staticmethod
    def from_expression(h: object,
                        bounds: tuple[float, float, float, float] = (-1.0, 1.0, -1.0, 1.0),
                        shape: tuple[int, int] = (101, 101)) -> "SolutionGrid":
        h = sp.sympify(h)
        xs = np.linspace(bounds[0], bounds[1], shape[0])
        ys = np.linspace(bounds[2], bounds[3], shape[1])
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        samples = {}
        for name, e in (("u", h), ("p", sp.diff(h, x)), ("q", sp.diff(h, y)),
                        ("r", sp.diff(h, x, x)), ("t", sp.diff(h, y, y))):
            fn = sp.lambdify((x, y), e, "numpy")
            samples[name] = np.broadcast_to(np.asarray(fn(gx, gy), dtype=float),
                                            gx.shape).copy()
        return SolutionGrid(xs, ys, samples, closed_form=h)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    def prolongation(self) -> dict[sp.Symbol, Expr]:
        if self.closed_form is None:
            raise ValueError("no closed form attached to this grid")
        h = self.closed_form
        return {u: h, p: sp.diff(h, x), q: sp.diff(h, y),
                r: sp.diff(h, x, x), t: sp.diff(h, y, y)}

    def max_abs(self, e: Expr) -> float:
        """Max |e(x, y)| over the grid for a closed-form expression."""
        fn = sp.lambdify((x, y), e, "numpy")
        gx, gy = self.mesh()
        vals = np.broadcast_to(np.asarray(fn(gx, gy), dtype=float), gx.shape)
        return float(np.max(np.abs(vals)))

    def pde_residual(self, F: object) -> float:
        """Own solution residual |u_xy - F| (exact partials when available)."""
        F = sp.sympify(F)
        if self.closed_form is not None:
            h = self.closed_form
            res = sp.diff(h, x, y) - F.xreplace(
                {u: h, p: sp.diff(h, x), q: sp.diff(h, y)})
            return self.max_abs(res)
        return self._fd_residual(self.samples["u"], F)

    def _fd_residual(self, ugrid: np.ndarray, F: object) -> float:
        hx = self.xs[1] - self.xs[0]
        hy = self.ys[1] - self.ys[0]
        uxy = (ugrid[2:, 2:] - ugrid[2:, :-2] - ugrid[:-2, 2:] + ugrid[:-2, :-2]) \
            / (4 * hx * hy)
        ux = (ugrid[2:, 1:-1] - ugrid[:-2, 1:-1]) / (2 * hx)
        uy = (ugrid[1:-1, 2:] - ugrid[1:-1, :-2]) / (2 * hy)
        gx, gy = self.mesh()
        fn = sp.lambdify((x, y, u, p, q), sp.sympify(F), "numpy")
        vals = fn(gx[1:-1, 1:-1], gy[1:-1, 1:-1], ugrid[1:-1, 1:-1], ux, uy)
        return float(np.max(np.abs(uxy - np.broadcast_to(vals, uxy.shape))))


def linearized_residual(F: object, grid: SolutionGrid, phi: object) -> float:
    """Residual of the linearized equation for a generating function ``phi``
    (an expression in the jet coordinates) evaluated through the solution's
    prolongation."""
    F = sp.sympify(F)
    phi = sp.sympify(phi)
    if grid.closed_form is not None:
        sub = grid.prolongation()
        phi_hat = phi.xreplace(sub)
        graph = {u: sub[u], p: sub[p], q: sub[q]}
        res = (sp.diff(phi_hat, x, y)
               - sp.diff(F, u).xreplace(graph) * phi_hat
               - sp.diff(F, p).xreplace(graph) * sp.diff(phi_hat, x)
               - sp.diff(F, q).xreplace(graph) * sp.diff(phi_hat, y))
        return grid.max_abs(res)
    # finite-difference fallback on sampled jets
    hx = grid.xs[1] - grid.xs[0]
    hy = grid.ys[1] - grid.ys[0]
    gx, gy = grid.mesh()
    args = (x, y, u, p, q, r, t)
    fields = (gx, gy, grid.samples["u"], grid.samples["p"], grid.samples["q"],
              grid.samples["r"], grid.samples["t"])
    phig = np.broadcast_to(sp.lambdify(args, phi, "numpy")(*fields), gx.shape)
    phixy = (phig[2:, 2:] - phig[2:, :-2] - phig[:-2, 2:] + phig[:-2, :-2]) \
        / (4 * hx * hy)
    phix = (phig[2:, 1:-1] - phig[:-2, 1:-1]) / (2 * hx)
    phiy = (phig[1:-1, 2:] - phig[1:-1, :-2]) / (2 * hy)
    inner = tuple(f[1:-1, 1:-1] for f in fields[:5])
    fu = sp.lambdify((x, y, u, p, q), sp.diff(F, u), "numpy")(*inner)
    fp = sp.lambdify((x, y, u, p, q), sp.diff(F, p), "numpy")(*inner)
    fq = sp.lambdify((x, y, u, p, q), sp.diff(F, q), "numpy")(*inner)
    res = phixy - fu * phig[1:-1, 1:-1] - fp * phix - fq * phiy
    return float(np.max(np.abs(res)))


@dataclass(frozen=True)
class TransportReport:
    entries: tuple[tuple[float, float], ...]   # (s, max residual)
    orders: tuple[float, ...]                  # consecutive log-log slopes

    def min_order(self) -> float:
        return min(self.orders) if self.orders else float("nan")


def transport_solution(F: object, fl: FlowMap, grid: SolutionGrid,
                       s_values: Sequence[float]) -> TransportReport:
    """Push a solution graph through a vertical flow and measure how well the
    transported function still solves the equation, per flow-parameter value."""
    F = sp.sympify(F)
    if fl.chart != JET_CHART:
        raise ValueError("flow must live on the jet chart")
    for coord in (x, y):
        if normalize(fl.component(coord) - coord) != 0:
            raise ValueError("flow must fix the base coordinates x and y")
    entries: list[tuple[float, float]] = []
    for s_val in s_values:
        s_num = sp.nsimplify(s_val, rational=True)
        if grid.closed_form is not None:
            sub = grid.prolongation()
            u_hat = fl.component(u).subs(fl.parameter, s_num).xreplace(sub)
            res = sp.diff(u_hat, x, y) - F.xreplace(
                {u: u_hat, p: sp.diff(u_hat, x), q: sp.diff(u_hat, y)})
            entries.append((float(s_val), grid.max_abs(res)))
        else:
            gx, gy = grid.mesh()
            args = JET_CHART.coords
            fields = (gx, gy, grid.samples["u"], grid.samples["p"],
                      grid.samples["q"], grid.samples["r"], grid.samples["t"])
            comp = fl.component(u).subs(fl.parameter, s_num)
            u_hat = np.broadcast_to(
                sp.lambdify(args, comp, "numpy")(*fields), gx.shape)
            entries.append((float(s_val), grid._fd_residual(u_hat, F)))
    orders: list[float] = []
    floor = 1e-13
    for (s1, r1), (s2, r2) in zip(entries, entries[1:]):
        if r1 < floor or r2 < floor or s1 == s2:
            continue
        orders.append(math.log(r1 / r2) / math.log(s1 / s2))
    return TransportReport(tuple(entries), tuple(orders))


def integrate_flow_numeric(Xf: VectorField, start: Mapping[sp.Symbol, float],
                           t_final: float, steps: int) -> dict[sp.Symbol, float]:
    """Classical fourth-order Runge-Kutta endpoint of an integral curve."""
    if steps < 1:
        raise ValueError("need at least one step")
    coords = Xf.chart.coords
    fns: list[Callable] = [sp.lambdify(coords, c, "math") for c in Xf.components]
    state = np.array([float(start[c]) for c in coords], dtype=float)

    def rhs(z: np.ndarray) -> np.ndarray:
        return np.array([f(*z) for f in fns], dtype=float)

    h = t_final / steps
    for _ in range(steps):
        k1 = rhs(state)
        k2 = rhs(state + h / 2 * k1)
        k3 = rhs(state + h / 2 * k2)
        k4 = rhs(state + h * k3)
        state = state + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return dict(zip(coords, state.tolist()))
