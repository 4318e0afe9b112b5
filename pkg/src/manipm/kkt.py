"""KKT vector field on the product space, its linearization, and the
stopping / merit metrics built from it.

At an iterate ``w = (x, y, z, s)`` the field stacks the Lagrangian gradient,
the equality residual, the shifted inequality residual ``g(x) + s`` and the
complementarity products ``z * s``.  Its covariant derivative and the adjoint
are applied matrix-free; no operator is ever materialized here.

Two scalar metrics play distinct roles: the squared field norm is the merit
function that drives line searches (slacks included), while the reported
KKT residual aggregates stationarity, feasibility, multiplier sign and
complementarity violations without any slack terms and is the solver's
stopping criterion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .manifolds import Manifold, ProductPoint, ProductTangent, product_inner
from .problems import ConstrainedProblem, ConstraintOps, LagrangianOps


@dataclass
class KktValue:
    """The four blocks of the KKT field at an iterate."""

    fx: object
    fy: np.ndarray
    fz: np.ndarray
    fs: np.ndarray

    def as_tangent(self) -> ProductTangent:
        return ProductTangent(self.fx, self.fy, self.fz, self.fs)


def kkt_field(
    problem: ConstrainedProblem, w: ProductPoint, ops: ConstraintOps | None = None
) -> KktValue:
    """Evaluate the KKT field ``(grad_x L, h(x), g(x) + s, z * s)`` at ``w``."""
    ops = ops or ConstraintOps(problem, w.x)
    lag = LagrangianOps(ops, w.y, w.z)
    return KktValue(lag.gradx(), ops.h().copy(), ops.g() + w.s, w.z * w.s)


def field_norm(problem: ConstrainedProblem, w: ProductPoint, field: KktValue) -> float:
    """Product-space norm of the field value."""
    m = problem.manifold
    n2 = (
        m.inner(w.x, field.fx, field.fx)
        + float(field.fy @ field.fy)
        + float(field.fz @ field.fz)
        + float(field.fs @ field.fs)
    )
    return float(np.sqrt(max(n2, 0.0)))


def nablaF_apply(
    problem: ConstrainedProblem,
    w: ProductPoint,
    dw: ProductTangent,
    ops: ConstraintOps | None = None,
    lag: LagrangianOps | None = None,
) -> ProductTangent:
    """Covariant derivative of the KKT field applied to ``dw``.

    Blockwise: ``(Hess_x L dx + H dy + G dz, H* dx, G* dx + ds, Z ds + S dz)``.
    The perturbed field shares this derivative for every barrier parameter,
    so perturbations only ever enter right-hand sides.
    """
    ops = ops or ConstraintOps(problem, w.x)
    lag = lag or LagrangianOps(ops, w.y, w.z)
    top = lag.hessvec(dw.dx) + ops.hx_apply(dw.dy) + ops.gx_apply(dw.dz)
    return ProductTangent(
        top,
        ops.hx_adjoint(dw.dx),
        ops.gx_adjoint(dw.dx) + dw.ds,
        w.z * dw.ds + w.s * dw.dz,
    )


def nablaF_adjoint_apply(
    problem: ConstrainedProblem,
    w: ProductPoint,
    v: ProductTangent,
    ops: ConstraintOps | None = None,
    lag: LagrangianOps | None = None,
) -> ProductTangent:
    """Adjoint of the covariant derivative under the product metric.

    Blockwise: ``(Hess_x L vx + H vy + G vz, H* vx, G* vx + S vs, vz + Z vs)``.
    """
    ops = ops or ConstraintOps(problem, w.x)
    lag = lag or LagrangianOps(ops, w.y, w.z)
    top = lag.hessvec(v.dx) + ops.hx_apply(v.dy) + ops.gx_apply(v.dz)
    return ProductTangent(
        top,
        ops.hx_adjoint(v.dx),
        ops.gx_adjoint(v.dx) + w.s * v.ds,
        v.dz + w.z * v.ds,
    )


def merit(problem: ConstrainedProblem, w: ProductPoint, field: KktValue | None = None) -> float:
    """Squared field norm; the line-search merit function."""
    field = field or kkt_field(problem, w)
    return field_norm(problem, w, field) ** 2


def grad_merit(
    problem: ConstrainedProblem,
    w: ProductPoint,
    field: KktValue | None = None,
    ops: ConstraintOps | None = None,
) -> ProductTangent:
    """Riemannian gradient of the merit function: twice the adjoint applied
    to the field value."""
    ops = ops or ConstraintOps(problem, w.x)
    field = field or kkt_field(problem, w, ops)
    return nablaF_adjoint_apply(problem, w, field.as_tangent(), ops) * 2.0


def kkt_residual(
    problem: ConstrainedProblem,
    w: ProductPoint,
    field: KktValue | None = None,
    ops: ConstraintOps | None = None,
) -> float:
    """Deviation of ``(x, y, z)`` from the KKT conditions (slack-free).

    Aggregates the Lagrangian gradient norm, negative multiplier parts,
    positive constraint parts, complementarity products, and the equality
    residuals, all in one Euclidean norm.
    """
    ops = ops or ConstraintOps(problem, w.x)
    field = field or kkt_field(problem, w, ops)
    g = field.fz - w.s
    grad2 = problem.manifold.inner(w.x, field.fx, field.fx)
    zneg = np.minimum(w.z, 0.0)
    gpos = np.maximum(g, 0.0)
    comp = w.z * g
    total = grad2 + float(zneg @ zneg + gpos @ gpos + comp @ comp) + float(field.fy @ field.fy)
    return float(np.sqrt(max(total, 0.0)))


def complementarity_chain_defect(w: ProductPoint, fnorm: float) -> float:
    """Largest violation of the norm chain
    ``|ZSe|/sqrt(m) <= z's/sqrt(m) <= |ZSe| <= |F(w)|`` (nonnegative z, s).

    Returns 0 when the chain holds; positive values measure the worst gap.
    """
    zs = w.z * w.s
    m = len(zs)
    if m == 0:
        return 0.0
    l2 = float(np.linalg.norm(zs))
    dot = float(w.z @ w.s)
    rootm = float(np.sqrt(m))
    return max(l2 / rootm - dot / rootm, dot / rootm - l2, l2 - fnorm, 0.0)
