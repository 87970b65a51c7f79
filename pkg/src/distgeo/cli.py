"""Command-line front end: model files, checks, reports.

Model files are line-oriented with ``[section]`` headers and
``name = value`` entries; expressions use the kernel grammar.  Reports are
byte-deterministic for a given model and flag set; ``--json`` mirrors every
report as a single structured document.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import sympy as sp

from . import expr as ek
from .distribution import (
    ComplementError,
    Distribution,
    SymmetryClassKind,
    classify,
    is_involutive,
)
from .expr import GenericityLedger, normalize, to_text
from .geometry import Chart, KForm, VectorField, one_form, pair
from .linalg import NotInSpan, rank, solve_membership
from .symmetry import determining_equations, lie_series_flow, verify_candidate
from .fgordon import SolutionGrid, transport_solution
from .symmetry import SymmetryAnsatz

__all__ = ["main", "ModelFile", "ModelError", "load_model"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CHECK_FAILED = 2


class ModelError(Exception):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def _split_top_level(text: str, sep: str = ",") -> list[str]:
    """Split on ``sep`` outside parentheses."""
    parts: list[str] = []
    depth = 0
    current: list[str] = []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
    parts.append("".join(current).strip())
    return [part for part in parts if part]


@dataclass
class Fixture:
    expression: ek.Expr
    bounds: tuple[float, float, float, float]
    shape: tuple[int, int]

    def grid(self) -> SolutionGrid:
        return SolutionGrid.from_expression(self.expression, self.bounds, self.shape)


@dataclass
class ModelFile:
    name: str
    chart: Chart
    parameters: dict[str, ek.Expr | None] = field(default_factory=dict)
    functions: dict[str, tuple[sp.Symbol, ...]] = field(default_factory=dict)
    vectorfields: dict[str, VectorField] = field(default_factory=dict)
    forms: dict[str, KForm] = field(default_factory=dict)
    tangent_names: tuple[str, ...] = ()
    coform_names: tuple[str, ...] = ()
    complement: tuple[int, ...] | None = None
    ansatz: SymmetryAnsatz | None = None
    candidates: dict[str, dict[str, tuple[tuple[sp.Symbol, ...], ek.Expr]]] = \
        field(default_factory=dict)
    fixtures: dict[str, Fixture] = field(default_factory=dict)
    ledger: GenericityLedger = field(default_factory=GenericityLedger)
    _distribution: Distribution | None = None

    @property
    def distribution(self) -> Distribution:
        if self._distribution is None:
            if not self.tangent_names and not self.coform_names:
                raise ModelError("model declares no distribution")
            coforms = [self.forms[n] for n in self.coform_names] or None
            if self.tangent_names:
                self._distribution = Distribution.from_generators(
                    [self.vectorfields[n] for n in self.tangent_names],
                    vertical_complement=self.complement,
                    coforms=coforms)
            else:
                self._distribution = Distribution.from_coforms(
                    coforms, vertical_complement=self.complement)
            self._distribution.ledger.merge(self.ledger)
        return self._distribution


def _parse_sections(lines: list[str]) -> list[tuple[str, int, str]]:
    """Yield (section, line_number, payload) triples."""
    out: list[tuple[str, int, str]] = []
    section = None
    for i, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            continue
        if section is None:
            raise ModelError(f"content before any [section]: {line!r}", i)
        out.append((section, i, line))
    return out


_KNOWN_SECTIONS = {
    "coordinates", "parameters", "functions", "vectorfields", "forms",
    "distribution", "ansatz", "candidates", "fixtures",
}


def load_model(path: str | Path) -> ModelFile:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc}")
    entries = _parse_sections(lines)
    for section, i, _ in entries:
        if section not in _KNOWN_SECTIONS:
            raise ModelError(f"unknown section [{section}]", i)

    def payloads(name: str) -> list[tuple[int, str]]:
        return [(i, text) for s, i, text in entries if s == name]

    coord_items: list[str] = []
    for i, text in payloads("coordinates"):
        coord_items.extend(_split_top_level(text))
    if not coord_items:
        raise ModelError("model must declare [coordinates]")
    chart = Chart(tuple(sp.Symbol(n) for n in coord_items))

    model = ModelFile(name=path.stem, chart=chart)

    param_values: dict[sp.Symbol, ek.Expr] = {}
    for i, text in payloads("parameters"):
        if "=" in text:
            name, value = (part.strip() for part in text.split("=", 1))
            try:
                param_values[sp.Symbol(name)] = ek.parse(value, model.ledger)
            except ek.ParseError as exc:
                raise ModelError(str(exc), i)
            model.parameters[name] = param_values[sp.Symbol(name)]
        else:
            for name in _split_top_level(text):
                model.parameters[name] = None

    for i, text in payloads("functions"):
        for decl in _split_top_level(text):
            if "(" not in decl or not decl.endswith(")"):
                raise ModelError(f"bad function declaration {decl!r}", i)
            name, arglist = decl[:-1].split("(", 1)
            args = tuple(sp.Symbol(a.strip()) for a in arglist.split(","))
            model.functions[name.strip()] = args

    def parse_expr(text: str, line: int) -> ek.Expr:
        try:
            e = ek.parse(text, model.ledger)
        except ek.ParseError as exc:
            raise ModelError(str(exc), line)
        if param_values:
            e = e.xreplace(param_values)
        allowed = set(chart.coords) | {
            sp.Symbol(n) for n, v in model.parameters.items() if v is None}
        stray = e.free_symbols - allowed
        if stray:
            raise ModelError(
                "undeclared symbols: " + ", ".join(sorted(s.name for s in stray)),
                line)
        return normalize(e)

    def entry(text: str, line: int) -> tuple[str, str]:
        if "=" not in text:
            raise ModelError(f"expected 'name = value', got {text!r}", line)
        name, value = text.split("=", 1)
        return name.strip(), value.strip()

    for i, text in payloads("vectorfields"):
        name, value = entry(text, i)
        comps = [parse_expr(part, i) for part in _split_top_level(value)]
        if len(comps) != chart.dim:
            raise ModelError(
                f"{name}: expected {chart.dim} components, got {len(comps)}", i)
        model.vectorfields[name] = VectorField(chart, tuple(comps))

    for i, text in payloads("forms"):
        name, value = entry(text, i)
        comps = [parse_expr(part, i) for part in _split_top_level(value)]
        if len(comps) != chart.dim:
            raise ModelError(
                f"{name}: expected {chart.dim} coefficients, got {len(comps)}", i)
        model.forms[name] = one_form(chart, comps)

    for i, text in payloads("distribution"):
        key, value = entry(text, i)
        names = _split_top_level(value)
        if key == "tangent":
            for n in names:
                if n not in model.vectorfields:
                    raise ModelError(f"unknown vector field {n!r}", i)
            model.tangent_names = tuple(names)
        elif key == "coform":
            for n in names:
                if n not in model.forms:
                    raise ModelError(f"unknown form {n!r}", i)
            model.coform_names = tuple(names)
        elif key == "complement":
            try:
                model.complement = tuple(chart.index(sp.Symbol(n)) for n in names)
            except ValueError:
                raise ModelError("complement names must be chart coordinates", i)
        else:
            raise ModelError(f"unknown distribution key {key!r}", i)

    ansatz_entries: list[tuple[sp.Symbol, object]] = []
    for i, text in payloads("ansatz"):
        key, value = entry(text, i)
        coord = sp.Symbol(key)
        if coord not in chart.coords:
            raise ModelError(f"{key!r} is not a chart coordinate", i)
        stripped = value.strip()
        if "(" in stripped and stripped.endswith(")"):
            fname, arglist = stripped[:-1].split("(", 1)
            fname = fname.strip()
            if (fname not in model.functions and fname.isidentifier()
                    and fname not in ek._ELEMENTARY):
                args = tuple(sp.Symbol(a.strip()) for a in arglist.split(","))
                ansatz_entries.append((coord, (fname, args)))
                continue
        ansatz_entries.append((coord, parse_expr(stripped, i)))
    if ansatz_entries:
        by_coord = dict(ansatz_entries)
        coeffs = tuple(by_coord.get(c, sp.Integer(0)) for c in chart.coords)
        model.ansatz = SymmetryAnsatz(chart, coeffs)

    for i, text in payloads("candidates"):
        name, value = entry(text, i)
        if model.ansatz is None:
            raise ModelError("candidates need an [ansatz] section", i)
        unknowns = dict(model.ansatz.unknowns())
        bindings: dict[str, tuple[tuple[sp.Symbol, ...], ek.Expr]] = {}
        for piece in _split_top_level(value, ";"):
            if ":" not in piece:
                raise ModelError(f"expected 'Fn: expr', got {piece!r}", i)
            fname, body = (part.strip() for part in piece.split(":", 1))
            if fname not in unknowns:
                raise ModelError(f"{fname!r} is not an ansatz unknown", i)
            bindings[fname] = (unknowns[fname], parse_expr(body, i))
        missing = sorted(set(unknowns) - set(bindings))
        if missing:
            raise ModelError(f"{name}: unbound unknowns {missing}", i)
        model.candidates[name] = bindings

    for i, text in payloads("fixtures"):
        name, value = entry(text, i)
        if "|" not in value:
            raise ModelError(
                f"{name}: expected 'expr | x0 x1 y0 y1 nx ny'", i)
        expr_text, grid_text = value.split("|", 1)
        numbers = grid_text.split()
        if len(numbers) != 6:
            raise ModelError(f"{name}: need 6 grid numbers", i)
        try:
            bounds = tuple(float(v) for v in numbers[:4])
            shape = (int(numbers[4]), int(numbers[5]))
        except ValueError:
            raise ModelError(f"{name}: bad grid numbers", i)
        model.fixtures[name] = Fixture(parse_expr(expr_text.strip(), i),
                                       bounds, shape)
    return model


# ---------------------------------------------------------------------------
# Reports

class Report:
    def __init__(self, command: str, model: str):
        self.command = command
        self.model = model
        self.results: list[dict] = []
        self.genericity: list[str] = []

    def add(self, **kwargs) -> None:
        self.results.append(kwargs)

    def set_genericity(self, ledger: GenericityLedger) -> None:
        self.genericity = sorted(to_text(e) for e in ledger.entries)

    def render_text(self) -> str:
        lines = [f"command: {self.command}", f"model: {self.model}"]
        for item in self.results:
            for key, value in item.items():
                lines.append(f"{key}: {value}")
        if self.genericity:
            lines.append("genericity: " + "; ".join(self.genericity))
        return "\n".join(lines) + "\n"

    def render_json(self) -> str:
        doc = {
            "command": self.command,
            "model": self.model,
            "results": self.results,
            "genericity": self.genericity,
        }
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _field_text(vf: VectorField) -> str:
    parts = []
    for comp, coord in zip(vf.components, vf.chart.coords):
        if comp == 0:
            continue
        parts.append(f"({to_text(comp)})*D{coord.name}")
    return " + ".join(parts) if parts else "0"


def _span_equal(model: ModelFile, computed: list[KForm]) -> bool:
    declared = [model.forms[n] for n in model.coform_names]
    if not declared:
        return True
    dim = model.chart.dim
    dec_vecs = [[f.coefficient((j,)) for j in range(dim)] for f in declared]
    comp_vecs = [[f.coefficient((j,)) for j in range(dim)] for f in computed]
    for v in comp_vecs:
        if isinstance(solve_membership(dec_vecs, v, model.ledger), NotInSpan):
            return False
    for v in dec_vecs:
        if isinstance(solve_membership(comp_vecs, v, model.ledger), NotInSpan):
            return False
    return True


def cmd_check(model: ModelFile, args) -> tuple[Report, int]:
    report = Report("check", model.name)
    D = model.distribution
    m, _ = rank(D.generator_matrix(), D.ledger)
    from .distribution import annihilator
    computed = annihilator(D)
    pairings_ok = all(
        pair(w, g) == 0 for w in computed for g in D.generators)
    span_ok = _span_equal(model, computed)
    involutive, witness = is_involutive(D)
    report.add(**{
        "chart dimension": model.chart.dim,
        "generators": D.dim,
        "rank": m,
        "annihilator dimension": len(computed),
        "annihilator pairings vanish": str(pairings_ok).lower(),
        "annihilator matches declared coforms": str(span_ok).lower(),
        "involutive": str(involutive).lower(),
    })
    if witness is not None:
        gi = model.tangent_names[witness.i] if model.tangent_names else str(witness.i)
        gj = model.tangent_names[witness.j] if model.tangent_names else str(witness.j)
        report.add(witness=f"[{gi}, {gj}] = {_field_text(witness.bracket)}")
    report.set_genericity(D.ledger)
    code = EXIT_OK
    if not (pairings_ok and span_ok):
        code = EXIT_CHECK_FAILED
    if args.require_involutive and not involutive:
        code = EXIT_CHECK_FAILED
    return report, code


def cmd_symmetry(model: ModelFile, args) -> tuple[Report, int]:
    report = Report("symmetry", model.name)
    name = args.candidate
    if name not in model.vectorfields:
        raise ModelError(f"unknown vector field {name!r}")
    D = model.distribution
    result = classify(D, model.vectorfields[name])
    if result.kind is SymmetryClassKind.NOT_A_SYMMETRY:
        w = result.witness
        gname = model.tangent_names[w.generator_index] \
            if model.tangent_names else str(w.generator_index)
        report.add(candidate=name, **{"class": "not a symmetry"},
                   witness=f"[{name}, {gname}] = {_field_text(w.detail)}")
    elif result.kind is SymmetryClassKind.CHARACTERISTIC:
        report.add(candidate=name, **{"class": "characteristic"})
    else:
        report.add(candidate=name, **{"class": "shuffling"},
                   representative=_field_text(result.representative))
    report.set_genericity(D.ledger)
    return report, EXIT_OK


def cmd_determining(model: ModelFile, args) -> tuple[Report, int]:
    report = Report("determining", model.name)
    if model.ansatz is None:
        raise ModelError("model has no [ansatz] section")
    D = model.distribution
    system = determining_equations(D, model.ansatz)
    if system.is_empty():
        report.add(**{"system": "empty",
                      "note": "ansatz is unconditionally a symmetry"})
    else:
        report.add(equations=len(system))
        for eq in system.equations:
            report.add(**{
                f"({eq.coform_index},{eq.generator_index},"
                f"{to_text(eq.monomial)})": to_text(eq.expression)})
    code = EXIT_OK
    if args.verify:
        if args.verify not in model.candidates:
            raise ModelError(f"unknown candidate {args.verify!r}")
        statuses = verify_candidate(system, model.candidates[args.verify],
                                    probes=args.probes)
        all_zero = all(s.is_zero for s in statuses)
        if all_zero:
            report.add(**{"verify": args.verify,
                          "residuals": f"all {len(statuses)} zero"})
        else:
            bad = [
                f"({eq.coform_index},{eq.generator_index},{to_text(eq.monomial)})"
                for eq, s in zip(system.equations, statuses) if not s.is_zero]
            report.add(**{"verify": args.verify,
                          "residuals": "nonzero at " + ", ".join(bad)})
            code = EXIT_CHECK_FAILED
    report.set_genericity(D.ledger)
    return report, code


def cmd_flow(model: ModelFile, args) -> tuple[Report, int]:
    report = Report("flow", model.name)
    name = args.field
    if name not in model.vectorfields:
        raise ModelError(f"unknown vector field {name!r}")
    fl = lie_series_flow(model.vectorfields[name], max_order=args.max_order)
    report.add(field=name,
               exact=str(fl.exact).lower(),
               **({"degree": fl.order} if fl.exact
                  else {"truncated at": fl.order}))
    for coord, comp in zip(fl.chart.coords, fl.components):
        report.add(**{coord.name: to_text(comp)})
    if args.at is not None:
        frozen = fl.components
        value = ek.parse(args.at)
        for coord, comp in zip(fl.chart.coords, frozen):
            report.add(**{f"{coord.name} at {args.at}":
                          to_text(normalize(comp.subs(fl.parameter, value)))})
    return report, EXIT_OK


def cmd_transport(model: ModelFile, args) -> tuple[Report, int]:
    report = Report("transport", model.name)
    if args.fixture not in model.fixtures:
        raise ModelError(f"unknown fixture {args.fixture!r}")
    if args.field not in model.vectorfields:
        raise ModelError(f"unknown vector field {args.field!r}")
    rhs = _model_rhs(model)
    grid = model.fixtures[args.fixture].grid()
    fl = lie_series_flow(model.vectorfields[args.field], max_order=args.max_order)
    s_values = [float(v) for v in args.s.split(",")]
    result = transport_solution(rhs, fl, grid, s_values)
    report.add(fixture=args.fixture, field=args.field,
               **{"fixture residual": f"{grid.pde_residual(rhs):.3e}"})
    for s_val, res in result.entries:
        report.add(s=f"{s_val:g}", max_residual=f"{res:.6e}")
    if result.orders:
        report.add(**{"empirical orders":
                      ", ".join(f"{o:.3f}" for o in result.orders)})
    return report, EXIT_OK


def _model_rhs(model: ModelFile) -> ek.Expr:
    """Equation right-hand side: read off the q-slot of the first generator.

    Transport models present the PDE through the first tangent generator
    Dx + p Du + r Dp + F Dq, so its q-component is the source term.
    """
    if not model.tangent_names:
        raise ModelError("transport needs tangent generators")
    first = model.vectorfields[model.tangent_names[0]]
    qi = model.chart.index(sp.Symbol("q"))
    return first.components[qi]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distgeo",
        description="Distribution geometry toolkit for jet-space models")
    parser.add_argument("--json", action="store_true",
                        help="emit a machine-readable report")
    parser.add_argument("--max-order", type=int, default=12,
                        help="flow series truncation order")
    parser.add_argument("--probes", type=int, default=8,
                        help="random probes per zero test")
    parser.add_argument("--tolerance", type=float, default=1e-6,
                        help="numeric tolerance for harness checks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="structure, annihilator, involutivity")
    p_check.add_argument("model")
    p_check.add_argument("--require-involutive", action="store_true")

    p_sym = sub.add_parser("symmetry", help="classify a candidate vector field")
    p_sym.add_argument("model")
    p_sym.add_argument("candidate")

    p_det = sub.add_parser("determining", help="print/verify determining system")
    p_det.add_argument("model")
    p_det.add_argument("--verify", default=None)

    p_flow = sub.add_parser("flow", help="Lie-series flow of a vector field")
    p_flow.add_argument("model")
    p_flow.add_argument("field")
    p_flow.add_argument("--at", default=None,
                        help="also print the map at this parameter value")

    p_tr = sub.add_parser("transport", help="push a fixture through a flow")
    p_tr.add_argument("model")
    p_tr.add_argument("fixture")
    p_tr.add_argument("field")
    p_tr.add_argument("--s", default="0.1,0.05,0.025",
                      help="comma-separated parameter values")
    return parser


_COMMANDS = {
    "check": cmd_check,
    "symmetry": cmd_symmetry,
    "determining": cmd_determining,
    "flow": cmd_flow,
    "transport": cmd_transport,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        model = load_model(args.model)
        report, code = _COMMANDS[args.command](model, args)
    except (ModelError, ek.ExprError, ComplementError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    sys.stdout.write(report.render_json() if args.json else report.render_text())
    return code


if __name__ == "__main__":
    sys.exit(main())
