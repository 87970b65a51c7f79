"""Symbolic calculus for tangent distributions on jet charts.

The package decides involutivity, infinitesimal and finite symmetries, and
the characteristic/shuffling split for distributions presented by vector
fields or annihilating 1-forms, with hyperbolic second-order equations
u_xy = F(x, y, u, u_x, u_y) as the main application.
"""

from .expr import (
    Expr,
    GenericityLedger,
    ParseError,
    UnresolvedZeroError,
    ZeroKind,
    ZeroStatus,
    eval_numeric,
    is_zero,
    normalize,
    parse,
    substitute,
    to_text,
)
from .geometry import (
    Chart,
    KForm,
    SmoothMap,
    VectorField,
    bracket,
    coordinate_field,
    exterior_derivative,
    interior_product,
    lie_derivative,
    one_form,
    pair,
    pullback,
    wedge,
)
from .linalg import ExprMatrix, NotInSpan, nullspace, rank, rref, solve_membership
from .distribution import (
    Distribution,
    SymmetryClass,
    SymmetryClassKind,
    annihilator,
    classify,
    coform_kernel,
    contains_vf,
    is_finite_symmetry,
    is_involutive,
    is_symmetry_brackets,
    is_symmetry_forms,
    reduce_mod,
)
from .symmetry import (
    DeterminingSystem,
    FlowMap,
    SymmetryAnsatz,
    determining_equations,
    flow_as_map,
    lie_series_flow,
    verify_candidate,
)
from .fgordon import (
    KleinGordonInstance,
    SolutionGrid,
    cartan_model,
    fgordon_model,
    graph_map,
    integrate_flow_numeric,
    kg_from_physical,
    klein_gordon,
    linearized_residual,
    point_ansatz,
    shuffle_representative,
    transport_solution,
)

__version__ = "1.0.0"
