"""Expression kernel: parsing, printing, calculus and zero-testing.

Expressions are plain immutable sympy trees restricted to the fragment the
rest of the package needs: rational constants, symbols, sums, products,
integer powers, applied undefined functions (and their partial derivatives)
and a fixed set of elementary functions.  All public operations accept and
return sympy ``Expr`` objects; normalization puts the rational-function part
into a canonical expanded num/den form, so structural equality of normal
forms decides equality on that fragment.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

import sympy as sp
from sympy.core.function import AppliedUndef, UndefinedFunction

Expr = sp.Expr

__all__ = [
    "Expr",
    "ZeroKind",
    "ZeroStatus",
    "GenericityLedger",
    "ExprError",
    "ParseError",
    "SubstitutionError",
    "CollectError",
    "EvalError",
    "parse",
    "to_text",
    "diff",
    "substitute",
    "normalize",
    "is_zero",
    "eval_numeric",
    "collect_terms",
    "sym",
    "ufunc",
]

# Fixed elementary-function vocabulary; anything else with an argument list
# is an applied undefined function, except the names in _REJECTED which are
# reserved so that typos do not silently become undefined functions.
_ELEMENTARY: dict[str, Callable] = {
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "exp": sp.exp,
    "ln": sp.log,
    "tanh": sp.tanh,
    "sech": sp.sech,
}
_REJECTED = {
    "log", "sqrt", "sinh", "cosh", "coth", "csch",
    "cot", "sec", "csc", "asin", "acos", "atan",
}

_NUMERIC_ELEMENTARY: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": math.log,
    "tanh": math.tanh,
    "sech": lambda v: 1.0 / math.cosh(v),
}


class ExprError(Exception):
    """Base class for kernel errors."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int, expected: frozenset[str] = frozenset()):
        self.offset = offset
        self.expected = expected
        detail = f"{message} at offset {offset}"
        if expected:
            detail += " (expected: " + ", ".join(sorted(expected)) + ")"
        super().__init__(detail)


class SubstitutionError(ExprError):
    pass


class CollectError(ExprError):
    pass


class EvalError(ExprError):
    pass


class UnresolvedZeroError(ExprError):
    """A zero test came back unresolved where a definite answer was required."""


def sym(name: str) -> sp.Symbol:
    return sp.Symbol(name)


def ufunc(name: str) -> UndefinedFunction:
    return sp.Function(name)


# ---------------------------------------------------------------------------
# Genericity ledger

class GenericityLedger:
    """Side channel of expressions assumed nonzero during cancellation/pivoting."""

    def __init__(self) -> None:
        self._entries: list[Expr] = []
        self._seen: set[Expr] = set()

    def assume_nonzero(self, e: Expr) -> None:
        e = sp.expand(e)
        if e.is_number:
            return
        for factor in (e, -e):
            if factor in self._seen:
                return
        self._entries.append(e)
        self._seen.add(e)

    def merge(self, other: "GenericityLedger") -> None:
        for e in other._entries:
            self.assume_nonzero(e)

    @property
    def entries(self) -> tuple[Expr, ...]:
        return tuple(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __repr__(self) -> str:
        return f"GenericityLedger({[to_text(e) for e in self._entries]})"


# ---------------------------------------------------------------------------
# Zero status

class ZeroKind(Enum):
    ZERO = "zero"
    NONZERO = "nonzero"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class ZeroStatus:
    kind: ZeroKind
    probes: int = 0

    @staticmethod
    def zero() -> "ZeroStatus":
        return ZeroStatus(ZeroKind.ZERO)

    @staticmethod
    def nonzero(probes: int = 0) -> "ZeroStatus":
        return ZeroStatus(ZeroKind.NONZERO, probes)

    @staticmethod
    def unresolved(probes: int) -> "ZeroStatus":
        return ZeroStatus(ZeroKind.UNRESOLVED, probes)

    @property
    def is_zero(self) -> bool:
        return self.kind is ZeroKind.ZERO

    @property
    def is_nonzero(self) -> bool:
        return self.kind is ZeroKind.NONZERO


# ---------------------------------------------------------------------------
# Lexer / Pratt parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[+\-*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str   # "number" | "ident" | one-char operator | "end"
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        pos = m.end()
        if m.lastgroup == "ws":
            continue
        kind = m.lastgroup if m.lastgroup != "op" else m.group()
        tokens.append(_Token(kind, m.group(), m.start()))
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, ledger: GenericityLedger | None = None):
        self.text = text
        self.tokens = _tokenize(text)
        self.ledger = ledger
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(
                f"unexpected token {tok.text!r}", tok.pos, frozenset({kind}))
        return self.advance()

    def parse(self) -> Expr:
        e = self.parse_sum()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"trailing input {tok.text!r}", tok.pos,
                             frozenset({"+", "-", "*", "/", "^", "end"}))
        return e

    def parse_sum(self) -> Expr:
        e = self.parse_product()
        while self.peek().kind in ("+", "-"):
            op = self.advance().kind
            rhs = self.parse_product()
            e = e + rhs if op == "+" else e - rhs
        return e

    def parse_product(self) -> Expr:
        e = self.parse_unary()
        while self.peek().kind in ("*", "/"):
            op = self.advance().kind
            rhs = self.parse_unary()
            if op == "*":
                e = e * rhs
            else:
                # identical factors cancel at construction, so the divisor
                # must be recorded here or the assumption is lost
                if self.ledger is not None and not rhs.is_number:
                    self.ledger.assume_nonzero(rhs)
                e = e / rhs
        return e

    def parse_unary(self) -> Expr:
        if self.peek().kind == "-":
            self.advance()
            return -self.parse_unary()
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        if self.peek().kind == "^":
            tok = self.advance()
            # exponent binds through unary minus; right-associative
            exponent = self.parse_unary() if self.peek().kind == "-" else self.parse_power()
            if not exponent.is_Integer:
                raise ParseError("exponent must be a literal integer", tok.pos)
            return base ** exponent
        return base

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return sp.Integer(int(tok.text))
        if tok.kind == "(":
            self.advance()
            e = self.parse_sum()
            self.expect(")")
            return e
        if tok.kind == "ident":
            self.advance()
            if self.peek().kind == "(":
                return self.parse_call(tok)
            return sp.Symbol(tok.text)
        raise ParseError(
            f"unexpected token {tok.text!r}", tok.pos,
            frozenset({"number", "identifier", "(", "-"}))

    def parse_call(self, name_tok: _Token) -> Expr:
        name = name_tok.text
        self.expect("(")
        args: list[Expr] = [self.parse_sum()]
        while self.peek().kind == ",":
            self.advance()
            args.append(self.parse_sum())
        self.expect(")")
        if name == "diff":
            if len(args) < 2:
                raise ParseError("diff needs an expression and at least one symbol",
                                 name_tok.pos)
            for v in args[1:]:
                if not isinstance(v, sp.Symbol):
                    raise ParseError("diff variables must be symbols", name_tok.pos)
            return sp.diff(args[0], *args[1:])
        if name in _ELEMENTARY:
            if len(args) != 1:
                raise ParseError(f"{name} takes exactly one argument", name_tok.pos)
            return _ELEMENTARY[name](args[0])
        if name in _REJECTED:
            raise ParseError(f"unknown elementary function {name!r}", name_tok.pos,
                             frozenset(_ELEMENTARY))
        return sp.Function(name)(*args)


def parse(text: str, ledger: GenericityLedger | None = None) -> Expr:
    """Parse ``text`` into an expression tree (already canonically flattened).

    When a ledger is supplied, every syntactic divisor is recorded as assumed
    nonzero.
    """
    return _Parser(text, ledger).parse()


# ---------------------------------------------------------------------------
# Printer

class _Printer(sp.printing.str.StrPrinter):
    def _print_Function(self, expr):
        name = expr.func.__name__
        if name == "log":
            name = "ln"
        return f"{name}({', '.join(self._print(a) for a in expr.args)})"

    def _print_Derivative(self, expr):
        head = self._print(expr.expr)
        vars_: list[str] = []
        for v, count in expr.variable_count:
            vars_.extend([self._print(v)] * int(count))
        return f"diff({head}, {', '.join(vars_)})"


_printer = _Printer({"order": None})


def to_text(e: Expr) -> str:
    """Deterministic canonical text; re-parsing yields the same tree."""
    return _printer.doprint(sp.sympify(e)).replace("**", "^")


# ---------------------------------------------------------------------------
# Calculus

def diff(e: Expr, *vars_: sp.Symbol) -> Expr:
    return sp.diff(sp.sympify(e), *vars_)


def substitute(e: Expr,
               bindings: Mapping[object, object],
               ledger: GenericityLedger | None = None) -> Expr:
    """Simultaneous substitution of symbols and undefined functions.

    Function bindings map an undefined function (or its name) to a pair
    ``(formal_args, body)``; derivative nodes of the function become the
    corresponding derivatives of the body.
    """
    e = sp.sympify(e)
    fun_subs: dict[UndefinedFunction, sp.Lambda] = {}
    sym_subs: dict[sp.Symbol, Expr] = {}
    for key, value in bindings.items():
        if isinstance(key, str):
            key = sp.Function(key) if isinstance(value, tuple) else sp.Symbol(key)
        if isinstance(key, UndefinedFunction):
            args, body = value
            args = tuple(args)
            for app in e.atoms(AppliedUndef):
                if app.func == key and len(app.args) != len(args):
                    raise SubstitutionError(
                        f"{key.__name__} bound with {len(args)} arguments but "
                        f"applied to {len(app.args)}")
            fun_subs[key] = sp.Lambda(args, sp.sympify(body))
        elif isinstance(key, sp.Symbol):
            sym_subs[key] = sp.sympify(value)
        else:
            raise SubstitutionError(f"cannot bind {key!r}")
    if fun_subs:
        e = e.subs(fun_subs).doit()
    if sym_subs:
        e = e.xreplace(sym_subs)
    return normalize(e, ledger)


# Rewrites applied before rational normalization.  The list is fixed; a
# general simplifier is deliberately out of scope.
def _elementary_rewrites(e: Expr) -> Expr:
    def squares(node):
        if (node.is_Pow and node.exp.is_Integer and node.exp >= 2
                and isinstance(node.base, (sp.sin, sp.tanh))):
            n = int(node.exp)
            arg = node.base.args[0]
            if isinstance(node.base, sp.sin):
                sq = 1 - sp.cos(arg) ** 2
            else:
                sq = 1 - sp.sech(arg) ** 2
            return sq ** (n // 2) * node.base ** (n % 2)
        return None

    return e.replace(lambda n: squares(n) is not None, squares)


def normalize(e: Expr, ledger: GenericityLedger | None = None) -> Expr:
    """Expanded canonical form over a common denominator.

    Cancelled nonconstant denominator factors are recorded in ``ledger``
    (they are assumed nonzero, never silently dropped).
    """
    e = sp.sympify(e)
    if e.is_Atom:
        return e
    if e.atoms(sp.sin, sp.tanh):
        e = _elementary_rewrites(e)
    try:
        flat = sp.together(sp.expand(e))
        num, den = sp.fraction(flat)
        out = sp.cancel(num / den)
        if ledger is not None and not den.is_number:
            _, new_den = sp.fraction(out)
            dropped = sp.cancel(den / new_den)
            if not dropped.is_number:
                ledger.assume_nonzero(dropped)
        return out
    except (sp.PolynomialError, sp.SympifyError, ZeroDivisionError):
        return sp.expand(e)


def _random_rational(rng: random.Random) -> sp.Rational:
    num = rng.randint(-1000, 1000)
    den = rng.randint(1, 1000)
    return sp.Rational(num, den)


def _random_polynomial(args: Sequence[sp.Symbol], rng: random.Random,
                       degree: int = 2) -> Expr:
    terms: list[Expr] = [sp.Rational(rng.randint(-9, 9), rng.randint(1, 4))]
    for a in args:
        for d in range(1, degree + 1):
            terms.append(sp.Rational(rng.randint(-9, 9), rng.randint(1, 4)) * a ** d)
    return sp.Add(*terms)


def _probe_once(e: Expr, rng: random.Random) -> bool | None:
    """One random evaluation; True = nonzero, False = zero, None = pole/invalid."""
    fun_map: dict[sp.Lambda, sp.Lambda] = {}
    subs: dict = {}
    for app in e.atoms(AppliedUndef):
        if app.func not in subs:
            dummies = sp.symbols(f"_pr0:{len(app.args)}")
            if len(app.args) == 1:
                dummies = (dummies[0],)
            subs[app.func] = sp.Lambda(tuple(dummies),
                                       _random_polynomial(dummies, rng))
    try:
        val = e.subs(subs).doit() if subs else e
        point = {s: _random_rational(rng) for s in val.free_symbols}
        val = val.xreplace(point)
        if val.free_symbols:
            return None
        if val.atoms(sp.Function):
            approx = val.evalf(40)
            if not approx.is_number or approx.has(sp.zoo, sp.nan, sp.oo):
                return None
            return abs(approx) > sp.Float("1e-25")
        val = sp.nsimplify(val, rational=True) if not val.is_Rational else val
        val = sp.cancel(val)
        if val.has(sp.zoo, sp.nan, sp.oo):
            return None
        return val != 0
    except (ZeroDivisionError, ValueError, sp.PolynomialError):
        return None


def _is_rational_function(e: Expr) -> bool:
    return not e.atoms(sp.Function)


def is_zero(e: Expr, probes: int = 8, seed: int = 0,
            ledger: GenericityLedger | None = None) -> ZeroStatus:
    """Decide whether ``e`` vanishes identically.

    Exact on the rational-function fragment; otherwise falls back to random
    rational probing with undefined functions replaced by random low-degree
    polynomials.  All-zero probes with a nonzero normal form yield an
    unresolved status rather than a guess.
    """
    n = normalize(e, ledger)
    if n == 0:
        return ZeroStatus.zero()
    if _is_rational_function(n):
        # normal form is canonical here, so a nonzero form is truly nonzero
        return ZeroStatus.nonzero()
    rng = random.Random(seed)
    done = 0
    attempts = 0
    while done < probes and attempts < probes * 8:
        attempts += 1
        verdict = _probe_once(n, rng)
        if verdict is None:
            continue
        done += 1
        if verdict:
            return ZeroStatus.nonzero(done)
    return ZeroStatus.unresolved(done)


# ---------------------------------------------------------------------------
# Numeric evaluation

FnTable = Mapping[str, object]


def _derivative_key(d: sp.Derivative) -> tuple[str, tuple[int, ...]]:
    app = d.expr
    if not isinstance(app, AppliedUndef):
        raise EvalError(f"cannot evaluate derivative of {app}")
    slots: list[int] = []
    arg_index = {a: i for i, a in enumerate(app.args)}
    for v, count in d.variable_count:
        if v not in arg_index:
            raise EvalError(f"derivative variable {v} is not an argument of {app}")
        slots.extend([arg_index[v]] * int(count))
    return app.func.__name__, tuple(sorted(slots))


def eval_numeric(e: Expr, point: Mapping[object, float],
                 fns: FnTable | None = None) -> float:
    """IEEE-double evaluation; every symbol and undefined function must be bound.

    ``fns`` maps a function name either to a callable (plain values) or to a
    dict keyed by sorted argument-slot multi-indices, ``()`` for the value and
    e.g. ``(0, 1)`` for a mixed second partial.
    """
    env = {sp.Symbol(k) if isinstance(k, str) else k: float(v)
           for k, v in point.items()}
    fns = fns or {}

    def ev(node: Expr) -> float:
        if node.is_Number:
            return float(node)
        if isinstance(node, sp.Symbol):
            if node not in env:
                raise EvalError(f"unbound symbol {node}")
            return env[node]
        if isinstance(node, sp.Add):
            return math.fsum(ev(a) for a in node.args)
        if isinstance(node, sp.Mul):
            out = 1.0
            for a in node.args:
                out *= ev(a)
            return out
        if isinstance(node, sp.Pow):
            base, exponent = ev(node.base), ev(node.exp)
            if base == 0.0 and exponent < 0:
                raise EvalError("division by zero")
            try:
                return base ** exponent
            except (OverflowError, ValueError) as exc:
                raise EvalError(str(exc)) from exc
        if isinstance(node, sp.Derivative):
            name, slots = _derivative_key(node)
            table = fns.get(name)
            fn = table.get(slots) if isinstance(table, Mapping) else None
            if fn is None:
                raise EvalError(f"no binding for derivative {name}{slots}")
            return float(fn(*(ev(a) for a in node.expr.args)))
        if isinstance(node, AppliedUndef):
            name = node.func.__name__
            table = fns.get(name)
            if table is None:
                raise EvalError(f"unbound function {name}")
            fn = table.get(()) if isinstance(table, Mapping) else table
            return float(fn(*(ev(a) for a in node.args)))
        if isinstance(node, sp.Function):
            name = node.func.__name__
            fn = _NUMERIC_ELEMENTARY.get(name)
            if fn is None:
                raise EvalError(f"cannot evaluate {name} numerically")
            arg = ev(node.args[0])
            if name == "log" and arg <= 0.0:
                raise EvalError("ln of a nonpositive value")
            try:
                return fn(arg)
            except (OverflowError, ValueError) as exc:
                raise EvalError(str(exc)) from exc
        raise EvalError(f"cannot evaluate node {node!r}")

    return ev(sp.sympify(e))


# ---------------------------------------------------------------------------
# Coefficient collection

def collect_terms(e: Expr, vars_: Iterable[sp.Symbol]) -> list[tuple[Expr, Expr]]:
    """Complete coefficient decomposition of ``e`` by monomials in ``vars_``.

    The sum of monomial * coefficient normalizes back to ``e``.  Raises
    CollectError when ``e`` is not polynomial in one of the variables.
    """
    vars_ = list(vars_)
    e = normalize(e)
    if not vars_:
        return [(sp.Integer(1), e)]
    for v in vars_:
        for app in e.atoms(AppliedUndef):
            if v in app.free_symbols:
                raise CollectError(
                    f"{v} appears inside the function application {app}")
        num, den = sp.fraction(e)
        if v in den.free_symbols:
            raise CollectError(f"{v} appears in a denominator of {to_text(e)}")
    try:
        poly = sp.Poly(e, *vars_)
    except sp.PolynomialError as exc:
        raise CollectError(str(exc)) from exc
    out: list[tuple[Expr, Expr]] = []
    for exponents, coeff in poly.terms():
        monomial = sp.Mul(*[v ** k for v, k in zip(vars_, exponents)])
        out.append((monomial, sp.sympify(coeff)))
    return out
