"""Newton-system assembly and solution on tangent spaces.

The full linearized system in ``(dx, dy, dz, ds)`` is asymmetric, so it is
first condensed: eliminating ``ds`` and then ``dz`` leaves a self-adjoint
operator on ``T_x M x R^l``,

    (dx, dy)  |->  (A dx + H dy, H* dx),     A = Hess_x L + G S^{-1} Z G*,

which a conjugate residual iteration solves matrix-free (CR tolerates the
indefiniteness that rules out plain CG).  With no equality constraints the
system collapses to ``A dx = c`` on the tangent space alone.  The eliminated
blocks are recovered algebraically afterwards, so the third and fourth block
equations hold exactly and the residual of the full system equals the
residual CR left in the condensed one.

A dense-basis oracle is included for testing and diagnostics: it represents
the operators as explicit matrices on an orthonormal tangent basis and
solves with a direct method.  That path scales with the square of the
manifold dimension and exists only to validate the matrix-free one.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .kkt import KktValue, kkt_field, nablaF_apply
from .manifolds import (
    Manifold,
    ProductPoint,
    ProductTangent,
    flatten_tangent,
    orthonormal_basis,
)
from .problems import ConstrainedProblem, ConstraintOps, LagrangianOps


class InteriorViolationError(ValueError):
    """A multiplier or slack left the strictly positive interior."""


class DenseSolveError(RuntimeError):
    """The dense basis representation was numerically singular."""


CONVERGED = "converged"
MAX_ITER = "max_iter"
BREAKDOWN = "breakdown"


@dataclass
class CrReport:
    """Outcome of a conjugate residual solve."""

    iterations: int
    relative_residual: float
    status: str
    residual: object = dataclass_field(default=None, repr=False)


@dataclass
class _Pair:
    """Element of ``T_x M x R^l``; the solution space with equalities present."""

    xi: object
    y: np.ndarray

    def __add__(self, other):
        return _Pair(self.xi + other.xi, self.y + other.y)

    def __sub__(self, other):
        return _Pair(self.xi - other.xi, self.y - other.y)

    def __mul__(self, c):
        return _Pair(self.xi * c, self.y * c)

    __rmul__ = __mul__


def _check_interior(w: ProductPoint):
    if w.z.size and (np.min(w.z) <= 0.0 or np.min(w.s) <= 0.0):
        raise InteriorViolationError(
            f"(z, s) must be strictly positive: min z = {np.min(w.z):.3e}, "
            f"min s = {np.min(w.s):.3e}"
        )


class CondensedOperator:
    """Matrix-free application of the condensed Newton operator.

    One application costs one Lagrangian Hessian-vector product, one
    inequality-operator round trip for the ``G S^{-1} Z G*`` term, and the
    equality-operator pair when equalities are present.
    """

    def __init__(
        self,
        problem: ConstrainedProblem,
        w: ProductPoint,
        ops: ConstraintOps | None = None,
        lag: LagrangianOps | None = None,
    ):
        _check_interior(w)
        self.problem = problem
        self.w = w
        self.ops = ops or ConstraintOps(problem, w.x)
        self.lag = lag or LagrangianOps(self.ops, w.y, w.z)
        self.z_over_s = w.z / w.s

    def theta(self, dx):
        """The positive semidefinite slack-scaled term ``G S^{-1} Z G* dx``."""
        return self.ops.gx_apply(self.z_over_s * self.ops.gx_adjoint(dx))

    def apply_x(self, dx):
        """The ``A`` block alone (the whole operator when l = 0)."""
        return self.lag.hessvec(dx) + self.theta(dx)

    def apply(self, p: _Pair) -> _Pair:
        return _Pair(self.apply_x(p.xi) + self.ops.hx_apply(p.y), self.ops.hx_adjoint(p.xi))


def condensed_rhs(
    problem: ConstrainedProblem,
    w: ProductPoint,
    mu: float,
    field: KktValue | None = None,
    ops: ConstraintOps | None = None,
):
    """Right-hand side ``(c, q)`` of the condensed system at barrier ``mu``."""
    _check_interior(w)
    ops = ops or ConstraintOps(problem, w.x)
    field = field or kkt_field(problem, w, ops)
    u = (w.z * field.fz + mu - field.fs) / w.s
    c = -field.fx - ops.gx_apply(u)
    q = -field.fy
    return c, q


def cr_solve(apply_fn, rhs, inner_fn, tol: float = 1e-9, max_iter: int = 1000):
    """Conjugate residual iteration for a self-adjoint operator equation.

    Works on any vector type supporting ``+``, ``-`` and scalar ``*``; the
    inner product is supplied by the caller, so the same loop runs on plain
    arrays, tangent vectors, and tangent/multiplier pairs.  Exactly one
    operator application happens per iteration; the next conjugate-direction
    image is updated by recurrence.

    Stops when the residual drops below ``tol`` relative to the right-hand
    side, at ``max_iter``, or on breakdown of the ``<r, A r>`` coefficient,
    in which case the best iterate seen (by residual norm) is returned.
    """
    rhs_norm = float(np.sqrt(max(inner_fn(rhs, rhs), 0.0)))
    if rhs_norm == 0.0:
        return 0.0 * rhs, CrReport(0, 0.0, CONVERGED, residual=0.0 * rhs)

    v = 0.0 * rhs
    r = rhs
    ar = apply_fn(r)
    p = r
    ap = ar
    rho = inner_fn(r, ar)
    r_norm = rhs_norm
    best = (r_norm, v, r)
    n = 0
    status = CONVERGED
    while True:
        if r_norm / rhs_norm <= tol:
            status = CONVERGED
            break
        if n >= max_iter:
            status = MAX_ITER
            break
        if abs(rho) <= 1e-300 * r_norm**2:
            status = BREAKDOWN
            break
        ap_norm2 = inner_fn(ap, ap)
        if ap_norm2 <= 0.0:
            status = BREAKDOWN
            break
        alpha = rho / ap_norm2
        v = v + alpha * p
        r = r - alpha * ap
        ar = apply_fn(r)  # the single operator call of the iteration
        rho_next = inner_fn(r, ar)
        beta = rho_next / rho
        p = r + beta * p
        ap = ar + beta * ap
        rho = rho_next
        n += 1
        r_norm = float(np.sqrt(max(inner_fn(r, r), 0.0)))
        if r_norm < best[0]:
            best = (r_norm, v, r)

    if status == BREAKDOWN:
        r_norm, v, r = best
    return v, CrReport(n, r_norm / rhs_norm, status, residual=r)


def recover_dz_ds(
    problem: ConstrainedProblem,
    w: ProductPoint,
    mu: float,
    dx,
    field: KktValue | None = None,
    ops: ConstraintOps | None = None,
):
    """Back-substitute the eliminated multiplier and slack steps.

    ``dz = S^{-1}[Z (G* dx + F_z) + mu e - F_s]`` and
    ``ds = Z^{-1}(mu e - F_s - S dz)``; given any ``dx`` these make the last
    two block equations of the full system hold exactly.
    """
    _check_interior(w)
    ops = ops or ConstraintOps(problem, w.x)
    field = field or kkt_field(problem, w, ops)
    dz = (w.z * (ops.gx_adjoint(dx) + field.fz) + mu - field.fs) / w.s
    ds = (mu - field.fs - w.s * dz) / w.z
    return dz, ds


def solve_newton(
    problem: ConstrainedProblem,
    w: ProductPoint,
    mu: float,
    cr_tol: float = 1e-9,
    cr_max_iter: int = 1000,
    field: KktValue | None = None,
    ops: ConstraintOps | None = None,
    lag: LagrangianOps | None = None,
):
    """Solve the perturbed Newton system at ``w`` and assemble the full step.

    Condenses, runs CR, recovers ``(dz, ds)``.  With no equality constraints
    the CR iteration runs on the tangent space alone.  Returns the step and
    the CR report; the report's ``residual`` is the condensed-system residual
    vector, which equals the top-block residual of the full system.
    """
    ops = ops or ConstraintOps(problem, w.x)
    field = field or kkt_field(problem, w, ops)
    lag = lag or LagrangianOps(ops, w.y, w.z)
    op = CondensedOperator(problem, w, ops, lag)
    c, q = condensed_rhs(problem, w, mu, field, ops)
    manifold = problem.manifold

    if problem.n_eq == 0:
        inner_fn = lambda a, b: manifold.inner(w.x, a, b)
        dx, report = cr_solve(op.apply_x, c, inner_fn, tol=cr_tol, max_iter=cr_max_iter)
        dy = np.zeros(0)
    else:
        inner_fn = lambda a, b: manifold.inner(w.x, a.xi, b.xi) + float(a.y @ b.y)
        sol, report = cr_solve(
            op.apply, _Pair(c, q), inner_fn, tol=cr_tol, max_iter=cr_max_iter
        )
        dx, dy = sol.xi, sol.y

    dz, ds = recover_dz_ds(problem, w, mu, dx, field, ops)
    return ProductTangent(dx, dy, dz, ds), report


def newton_residual_correction(
    problem: ConstrainedProblem, w: ProductPoint, field: KktValue, report: CrReport
) -> float:
    """Inner product of the KKT field with the step's linear-system residual.

    The directional derivative of the merit function along the computed step
    differs from the exact-solve closed form by exactly twice this number.
    """
    r = report.residual
    if r is None or isinstance(r, float):
        return 0.0
    if isinstance(r, _Pair):
        return problem.manifold.inner(w.x, field.fx, r.xi) + float(field.fy @ r.y)
    return problem.manifold.inner(w.x, field.fx, r)


# ---------------------------------------------------------------------------
# Dense basis representation (test / diagnostic oracle)


@dataclass
class TangentBasis:
    """Orthonormal tangent basis with its flat ambient coordinate matrix."""

    vectors: list
    flat: np.ndarray  # ambient_size x dim, orthonormal columns

    @property
    def dim(self) -> int:
        return len(self.vectors)


def tangent_basis(manifold: Manifold, x, rng: np.random.Generator) -> TangentBasis:
    vectors = orthonormal_basis(manifold, x, rng)
    flat = np.column_stack([flatten_tangent(manifold, x, v) for v in vectors])
    return TangentBasis(vectors, flat)


def _coords(basis: TangentBasis, manifold: Manifold, x, xi) -> np.ndarray:
    return basis.flat.T @ flatten_tangent(manifold, x, xi)


def _from_coords(basis: TangentBasis, manifold: Manifold, x, coords: np.ndarray):
    return manifold.proj(x, (basis.flat @ coords).reshape(manifold.ambient_shape))


def dense_condensed_matrix(
    problem: ConstrainedProblem,
    w: ProductPoint,
    basis: TangentBasis,
    ops: ConstraintOps | None = None,
    lag: LagrangianOps | None = None,
) -> np.ndarray:
    """Matrix of the condensed operator on the orthonormal basis of
    ``T_x M`` (followed by the standard basis of the multiplier block)."""
    op = CondensedOperator(problem, w, ops, lag)
    manifold = problem.manifold
    d, l = basis.dim, problem.n_eq
    mat = np.zeros((d + l, d + l))
    for j, u in enumerate(basis.vectors):
        out = op.apply(_Pair(u, np.zeros(l)))
        mat[:d, j] = _coords(basis, manifold, w.x, out.xi)
        mat[d:, j] = out.y
    for j in range(l):
        e = np.zeros(l)
        e[j] = 1.0
        out = op.apply(_Pair(manifold.zero_tangent(w.x), e))
        mat[:d, d + j] = _coords(basis, manifold, w.x, out.xi)
        mat[d:, d + j] = out.y
    return mat


def dense_oracle(
    problem: ConstrainedProblem,
    w: ProductPoint,
    mu: float,
    rng: np.random.Generator,
    field: KktValue | None = None,
):
    """Direct solve of the Newton system through an explicit basis matrix.

    Returns ``(dw, matrix, rhs_vec)``: the assembled full step, the condensed
    operator's matrix representation, and the coordinate right-hand side.
    Raises :class:`DenseSolveError` with a condition estimate if the matrix
    is numerically singular.
    """
    ops = ConstraintOps(problem, w.x)
    field = field or kkt_field(problem, w, ops)
    lag = LagrangianOps(ops, w.y, w.z)
    manifold = problem.manifold
    basis = tangent_basis(manifold, w.x, rng)
    mat = dense_condensed_matrix(problem, w, basis, ops, lag)
    c, q = condensed_rhs(problem, w, mu, field, ops)
    rhs = np.concatenate([_coords(basis, manifold, w.x, c), q])

    svals = np.linalg.svd(mat, compute_uv=False)
    if svals[-1] <= 1e-14 * svals[0]:
        cond = np.inf if svals[-1] == 0.0 else svals[0] / svals[-1]
        raise DenseSolveError(f"condensed matrix numerically singular, cond ~ {cond:.3e}")
    sol = np.linalg.solve(mat, rhs)

    d = basis.dim
    dx = _from_coords(basis, manifold, w.x, sol[:d])
    dy = sol[d:]
    dz, ds = recover_dz_ds(problem, w, mu, dx, field, ops)
    return ProductTangent(dx, dy, dz, ds), mat, rhs


def dense_nablaF_matrix(
    problem: ConstrainedProblem,
    w: ProductPoint,
    rng: np.random.Generator,
    basis: TangentBasis | None = None,
):
    """Matrix of the KKT field's covariant derivative on the product basis.

    The basis stacks the orthonormal tangent basis with standard bases for
    the ``y``, ``z`` and ``s`` blocks; the result feeds spectral tests (the
    smallest singular value is positive at regular KKT points) and the
    agreement checks against the matrix-free application.
    """
    manifold = problem.manifold
    ops = ConstraintOps(problem, w.x)
    lag = LagrangianOps(ops, w.y, w.z)
    basis = basis or tangent_basis(manifold, w.x, rng)
    d = basis.dim
    l, m = problem.n_eq, problem.n_ineq
    dim = d + l + 2 * m
    mat = np.zeros((dim, dim))

    def product_coords(v: ProductTangent) -> np.ndarray:
        return np.concatenate([_coords(basis, manifold, w.x, v.dx), v.dy, v.dz, v.ds])

    col = 0
    zero_x = manifold.zero_tangent(w.x)
    for u in basis.vectors:
        dw = ProductTangent(u, np.zeros(l), np.zeros(m), np.zeros(m))
        mat[:, col] = product_coords(nablaF_apply(problem, w, dw, ops, lag))
        col += 1
    for block_size, maker in (
        (l, lambda e: ProductTangent(zero_x, e, np.zeros(m), np.zeros(m))),
        (m, lambda e: ProductTangent(zero_x, np.zeros(l), e, np.zeros(m))),
        (m, lambda e: ProductTangent(zero_x, np.zeros(l), np.zeros(m), e)),
    ):
        for j in range(block_size):
            e = np.zeros(block_size)
            e[j] = 1.0
            mat[:, col] = product_coords(nablaF_apply(problem, w, maker(e), ops, lag))
            col += 1
    return mat, basis
