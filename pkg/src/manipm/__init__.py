"""Interior point solver for constrained optimization on embedded matrix
manifolds, with benchmark generators and a solving service."""

from .manifolds import (
    Euclidean,
    FixedRank,
    FixedRankPoint,
    FixedRankTangent,
    Manifold,
    Oblique,
    ProductPoint,
    ProductTangent,
    Stiefel,
    orthonormal_basis,
    product_inner,
    product_norm,
    product_retract,
)
from .problems import (
    ComponentConstraints,
    ConstrainedProblem,
    ConstraintOps,
    ElementwiseNonnegativity,
    Objective,
    no_constraints,
)
from .kkt import kkt_field, kkt_residual, merit, grad_merit, nablaF_apply, nablaF_adjoint_apply
from .linsolve import cr_solve, dense_oracle, solve_newton
from .local_solver import LocalConfig, fraction_to_boundary, local_solve
from .global_solver import GlobalConfig, global_solve, initial_point
from .benchmarks import BenchmarkInstance, gen_model_ob, gen_model_st, gen_nlrm, generate
from .runner import InstanceSpec, TrialResult, builtin_suite, run_bench

__version__ = "0.1.0"

__all__ = [
    "Euclidean",
    "Stiefel",
    "Oblique",
    "FixedRank",
    "FixedRankPoint",
    "FixedRankTangent",
    "Manifold",
    "ProductPoint",
    "ProductTangent",
    "orthonormal_basis",
    "product_inner",
    "product_norm",
    "product_retract",
    "Objective",
    "ConstrainedProblem",
    "ConstraintOps",
    "ComponentConstraints",
    "ElementwiseNonnegativity",
    "no_constraints",
    "kkt_field",
    "kkt_residual",
    "merit",
    "grad_merit",
    "nablaF_apply",
    "nablaF_adjoint_apply",
    "cr_solve",
    "solve_newton",
    "dense_oracle",
    "LocalConfig",
    "local_solve",
    "fraction_to_boundary",
    "GlobalConfig",
    "global_solve",
    "initial_point",
    "BenchmarkInstance",
    "gen_nlrm",
    "gen_model_st",
    "gen_model_ob",
    "generate",
    "InstanceSpec",
    "TrialResult",
    "run_bench",
    "builtin_suite",
    "__version__",
]
