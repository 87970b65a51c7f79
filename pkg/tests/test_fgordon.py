import math

import numpy as np
import pytest
import sympy as sp

from distgeo.distribution import is_symmetry_brackets
from distgeo.expr import GenericityLedger, normalize
from distgeo.fgordon import (
    JET_CHART,
    SolutionGrid,
    cartan_model,
    eq21_residual,
    fgordon_model,
    graph_map,
    integrate_flow_numeric,
    kg_from_physical,
    klein_gordon,
    linearized_residual,
    shuffle_representative,
    transport_solution,
)
from distgeo.geometry import pair, pullback
from distgeo.symmetry import lie_series_flow

x, y, u, p, q, r, t = sp.symbols("x y u p q r t")
a, b = sp.symbols("a b")
p0, p1, p2 = sp.symbols("p0 p1 p2")


class TestCartanModel:
    def test_chart_and_field(self):
        f = sp.Function("f")(x, p0, p1)
        model = cartan_model(2, f)
        assert model.chart.coords == (x, p0, p1)
        assert model.field.components == (1, p1, f)

    def test_coforms_annihilate(self):
        f = sp.Function("f")(x, p0, p1, p2)
        model = cartan_model(3, f)
        for w in model.coforms:
            assert pair(w, model.field) == 0

    def test_rhs_order_checked(self):
        with pytest.raises(ValueError):
            cartan_model(2, p2)


class TestFGordonModel:
    def test_rejects_higher_jets(self):
        with pytest.raises(ValueError):
            fgordon_model(r * u)

    def test_coforms_annihilate_generators(self):
        F = sp.Function("F")(x, y, u, p, q)
        model = fgordon_model(F)
        for w in model.coforms:
            for g in model.generators:
                assert pair(w, g) == 0

    def test_graph_of_solution_annihilates_coforms(self):
        # a prolonged solution pulls every contact form back to zero
        kg = klein_gordon(1, 0)
        gm = graph_map(sp.exp(x + y))
        for w in kg.model.coforms:
            assert pullback(gm, w).is_zero_form()

    def test_graph_of_non_solution_keeps_first_forms_only(self):
        # prolongation kills w1 for any function, solutions also kill w2, w3
        kg = klein_gordon(1, 0)
        gm = graph_map(x * y)
        w1, w2, w3 = kg.model.coforms
        assert pullback(gm, w1).is_zero_form()
        assert not pullback(gm, w2).is_zero_form()


class TestKleinGordon:
    def test_physical_parameter_map(self):
        ledger = GenericityLedger()
        av, bv = kg_from_physical(2, 8, 4, ledger)
        assert av == -4 and bv == 2

    def test_physical_alpha_zero_rejected(self):
        with pytest.raises(ValueError):
            kg_from_physical(0, 1, 1)

    def test_scaling_field_is_symmetry(self):
        from distgeo.geometry import VectorField
        kg = klein_gordon(a, b)
        Sc = VectorField(JET_CHART, (x, -y, 0, -p, q, -2 * r, 2 * t))
        ok, _ = is_symmetry_brackets(kg.model.distribution, Sc)
        assert ok


class TestEq21:
    def test_translations_solve_generic_compat(self):
        F = sp.Function("F")(u)
        assert eq21_residual(F, -1, 0, 0) == 0
        assert eq21_residual(F, 0, -1, 0) == 0

    def test_scaling_solves_kg_compat(self):
        F = a * u + b * u ** 3
        assert eq21_residual(F, x, -y, 0) == 0

    def test_scaling_fails_for_generic_source(self):
        F = sp.Function("F")(x, y, u, p, q)
        assert eq21_residual(F, x, -y, 0) != 0

    def test_jet_coordinates_rejected_in_point_slot(self):
        with pytest.raises(ValueError):
            eq21_residual(a * u, p, 0, 0)


class TestShuffleRepresentative:
    def test_x_translation_representative(self):
        F = a * u + b * u ** 3
        ledger = GenericityLedger()
        W = shuffle_representative(F, -1, 0, 0, ledger)
        assert W.components[2] == p
        assert W.components[3] == r
        assert normalize(W.components[4] - F) == 0
        assert p in ledger.entries

    def test_y_translation_representative(self):
        F = a * u + b * u ** 3
        W = shuffle_representative(F, 0, -1, 0)
        assert W.components[2] == q
        assert normalize(W.components[3] - F) == 0
        assert W.components[4] == t

    def test_agrees_with_reduction(self):
        from distgeo.distribution import reduce_mod
        from distgeo.geometry import VectorField
        kg = klein_gordon(-2, 2)
        F = -2 * u + 2 * u ** 3
        Tx = VectorField(JET_CHART, (-1, 0, 0, 0, 0, 0, 0))
        rep = reduce_mod(kg.model.distribution, Tx, (2, 3, 4))
        W = shuffle_representative(F, -1, 0, 0)
        assert (rep - W).is_zero_field()


class TestSolutionGrid:
    def test_tanh_solves_kg(self):
        grid = SolutionGrid.from_expression(sp.tanh(x + y))
        assert grid.pde_residual(-2 * u + 2 * u ** 3) < 1e-10

    def test_exp_solves_linear(self):
        grid = SolutionGrid.from_expression(sp.exp(x + y))
        assert grid.pde_residual(u) < 1e-10

    def test_non_solution_large_residual(self):
        grid = SolutionGrid.from_expression(sp.tanh(x + y))
        assert grid.pde_residual(u) > 1e-2

    def test_fd_fallback_close_to_symbolic(self):
        grid = SolutionGrid.from_expression(sp.tanh(x + y))
        blind = SolutionGrid(grid.xs, grid.ys, grid.samples, closed_form=None)
        F = -2 * u + 2 * u ** 3
        assert abs(blind.pde_residual(F)) < 1e-2

    def test_minimum_size_enforced(self):
        with pytest.raises(ValueError):
            SolutionGrid.from_expression(sp.tanh(x + y), shape=(3, 3))


class TestLinearizedResidual:
    def test_generating_function_p(self):
        grid = SolutionGrid.from_expression(sp.tanh(x + y))
        F = -2 * u + 2 * u ** 3
        assert linearized_residual(F, grid, p) <= 1e-5

    def test_non_generating_function_fails(self):
        grid = SolutionGrid.from_expression(sp.tanh(x + y))
        F = -2 * u + 2 * u ** 3
        assert linearized_residual(F, grid, u ** 2) > 1e-3


class TestTransport:
    def test_requires_base_fixing_flow(self):
        from distgeo.geometry import VectorField
        grid = SolutionGrid.from_expression(sp.tanh(x + y))
        drift = VectorField(JET_CHART, (1, 0, 0, 0, 0, 0, 0))
        fl = lie_series_flow(drift, max_order=3)
        with pytest.raises(ValueError):
            transport_solution(-2 * u + 2 * u ** 3, fl, grid, [0.1])

    def test_zero_parameter_reproduces_own_residual(self):
        kg = klein_gordon(-2, 2)
        grid = SolutionGrid.from_expression(sp.tanh(x + y))
        fl = lie_series_flow(kg.x3)
        report = transport_solution(kg.model.rhs, fl, grid, [0.0])
        assert report.entries[0][1] == pytest.approx(
            grid.pde_residual(kg.model.rhs), abs=1e-12)

    def test_order_three_for_tanh(self):
        kg = klein_gordon(-2, 2)
        grid = SolutionGrid.from_expression(sp.tanh(x + y))
        fl = lie_series_flow(kg.x3)
        report = transport_solution(kg.model.rhs, fl, grid,
                                    [0.1, 0.05, 0.025])
        assert report.min_order() >= 1.9


class TestIntegrateFlowNumeric:
    def test_harmonic_oscillator(self):
        model = cartan_model(2, -p0)
        end = integrate_flow_numeric(
            model.field, {x: 0.0, p0: 1.0, p1: 0.0}, math.pi / 2, 10_000)
        assert abs(end[x] - math.pi / 2) < 1e-9
        assert abs(end[p0] - 0.0) < 1e-6
        assert abs(end[p1] + 1.0) < 1e-6

    def test_matches_exact_flow_of_nilpotent_field(self):
        kg = klein_gordon(-2, 2)
        fl = lie_series_flow(kg.x3)
        start = {x: 0.1, y: -0.2, u: 0.3, p: 0.4, q: 0.5, r: 0.6, t: 0.7}
        end = integrate_flow_numeric(kg.x3, start, 0.25, 2_000)
        sub = {fl.parameter: sp.Rational(1, 4), **{k: sp.nsimplify(v)
               for k, v in start.items()}}
        for coord in JET_CHART.coords:
            exact = float(fl.component(coord).xreplace(sub))
            assert abs(end[coord] - exact) < 1e-9
