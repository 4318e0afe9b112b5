"""Constrained problem definitions and constraint-gradient operators.

A problem bundles a manifold with an objective ``f``, inequality constraints
``g(x) <= 0`` and equality constraints ``h(x) = 0``.  All callbacks work in
ambient coordinates (they receive the ambient matrix of the current point and
return ambient derivatives); conversion to Riemannian gradients and Hessians
happens here through the manifold's projection and curvature formulas.

Constraint blocks expose a batched interface:

* ``value(x)``                      -- the constraint vector,
* ``weighted_egrad(x, u)``          -- ``sum_i u_i * egrad c_i(x)``,
* ``pair_egrads(x, xi_ambient)``    -- the vector ``<egrad c_i(x), xi>``,
* ``weighted_ehess(x, u, xi)``      -- ``sum_i u_i * ehess c_i(x)[xi]``.

For a tangent ``xi`` the pairing with the projected gradient equals the
pairing with the ambient gradient, so the adjoint operators cost a single
ambient contraction instead of one projection per component.  This matters
for elementwise bound constraints, where the component count equals the
number of matrix entries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .manifolds import Manifold, ProductPoint


@dataclass(frozen=True)
class Objective:
    """Scalar function with ambient first and second derivatives.

    ``ehess_vec(x, xi)`` is the ambient Hessian at ``x`` applied to the
    ambient matrix ``xi``.
    """

    value: Callable[[np.ndarray], float]
    egrad: Callable[[np.ndarray], np.ndarray]
    ehess_vec: Callable[[np.ndarray, np.ndarray], np.ndarray]


class ConstraintBlock:
    """Batched constraint interface; see the module docstring."""

    size: int

    def value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def weighted_egrad(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def pair_egrads(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def weighted_ehess(self, x: np.ndarray, u: np.ndarray, xi: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class ElementwiseNonnegativity(ConstraintBlock):
    """The constraints ``-X <= 0`` (one per matrix entry, row-major order)."""

    def __init__(self, shape: tuple[int, int]):
        self.shape = shape
        self.size = shape[0] * shape[1]

    def value(self, x):
        return -x.ravel()

    def weighted_egrad(self, x, u):
        return -u.reshape(self.shape)

    def pair_egrads(self, x, xi):
        return -xi.ravel()

    def weighted_ehess(self, x, u, xi):
        return np.zeros(self.shape)


class ComponentConstraints(ConstraintBlock):
    """Constraint block assembled from per-component callback triples."""

    def __init__(self, components: Sequence[Objective], shape: tuple[int, int]):
        self.components = list(components)
        self.shape = shape
        self.size = len(self.components)

    def value(self, x):
        return np.array([c.value(x) for c in self.components], dtype=float)

    def weighted_egrad(self, x, u):
        out = np.zeros(self.shape)
        for ui, c in zip(u, self.components):
            if ui != 0.0:
                out += ui * c.egrad(x)
        return out

    def pair_egrads(self, x, xi):
        return np.array([np.tensordot(c.egrad(x), xi) for c in self.components], dtype=float)

    def weighted_ehess(self, x, u, xi):
        out = np.zeros(self.shape)
        for ui, c in zip(u, self.components):
            if ui != 0.0:
                out += ui * c.ehess_vec(x, xi)
        return out


def no_constraints(shape: tuple[int, int]) -> ComponentConstraints:
    """Empty (zero-component) constraint block."""
    return ComponentConstraints([], shape)


@dataclass(frozen=True)
class ConstrainedProblem:
    """Minimize ``f`` on a manifold subject to ``h(x) = 0`` and ``g(x) <= 0``."""

    manifold: Manifold
    objective: Objective
    inequality: ConstraintBlock
    equality: ConstraintBlock

    def __post_init__(self):
        if self.inequality.size < 1:
            raise ValueError("interior point methods need at least one inequality constraint")

    @property
    def n_ineq(self) -> int:
        return self.inequality.size

    @property
    def n_eq(self) -> int:
        return self.equality.size


class ConstraintOps:
    """Constraint-gradient operators anchored at a fixed point ``x``.

    ``gx_apply`` maps a multiplier vector to the weighted sum of projected
    inequality-constraint gradients; ``gx_adjoint`` is its adjoint under the
    Riemannian metric.  ``hx_apply``/``hx_adjoint`` mirror this for the
    equality constraints and degenerate to zero-length vectors when there
    are none.
    """

    def __init__(self, problem: ConstrainedProblem, x):
        self.problem = problem
        self.x = x
        self.x_ambient = problem.manifold.point_ambient(x)
        self._g = None
        self._h = None

    def g(self) -> np.ndarray:
        if self._g is None:
            self._g = self.problem.inequality.value(self.x_ambient)
        return self._g

    def h(self) -> np.ndarray:
        if self._h is None:
            self._h = self.problem.equality.value(self.x_ambient)
        return self._h

    def gx_apply(self, u: np.ndarray):
        if u.shape != (self.problem.n_ineq,):
            raise ValueError(f"expected {self.problem.n_ineq} multipliers, got {u.shape}")
        return self.problem.manifold.proj(
            self.x, self.problem.inequality.weighted_egrad(self.x_ambient, u)
        )

    def gx_adjoint(self, xi) -> np.ndarray:
        xi_amb = self.problem.manifold.to_ambient(self.x, xi)
        return self.problem.inequality.pair_egrads(self.x_ambient, xi_amb)

    def hx_apply(self, v: np.ndarray):
        if v.shape != (self.problem.n_eq,):
            raise ValueError(f"expected {self.problem.n_eq} multipliers, got {v.shape}")
        if self.problem.n_eq == 0:
            return self.problem.manifold.zero_tangent(self.x)
        return self.problem.manifold.proj(
            self.x, self.problem.equality.weighted_egrad(self.x_ambient, v)
        )

    def hx_adjoint(self, xi) -> np.ndarray:
        if self.problem.n_eq == 0:
            return np.zeros(0)
        xi_amb = self.problem.manifold.to_ambient(self.x, xi)
        return self.problem.equality.pair_egrads(self.x_ambient, xi_amb)


class LagrangianOps:
    """Riemannian derivatives of the Lagrangian at a fixed ``(x, y, z)``.

    The combined ambient gradient is computed once; both the gradient and the
    Hessian-vector product convert the summed ambient data through a single
    manifold conversion, which is equivalent to converting term by term for
    embedded manifolds.
    """

    def __init__(self, ops: ConstraintOps, y: np.ndarray, z: np.ndarray):
        self.ops = ops
        self.y = y
        self.z = z
        p = ops.problem
        egrad = p.objective.egrad(ops.x_ambient)
        if p.n_eq:
            egrad = egrad + p.equality.weighted_egrad(ops.x_ambient, y)
        egrad = egrad + p.inequality.weighted_egrad(ops.x_ambient, z)
        self.combined_egrad = egrad

    def gradx(self):
        return self.ops.problem.manifold.proj(self.ops.x, self.combined_egrad)

    def hessvec(self, dx):
        p = self.ops.problem
        xi_amb = p.manifold.to_ambient(self.ops.x, dx)
        ehess = p.objective.ehess_vec(self.ops.x_ambient, xi_amb)
        if p.n_eq:
            ehess = ehess + p.equality.weighted_ehess(self.ops.x_ambient, self.y, xi_amb)
        ehess = ehess + p.inequality.weighted_ehess(self.ops.x_ambient, self.z, xi_amb)
        return p.manifold.ehess2rhess(self.ops.x, self.combined_egrad, ehess, dx)


def constraint_ops(problem: ConstrainedProblem, x) -> ConstraintOps:
    return ConstraintOps(problem, x)


def lagrangian_gradx(problem: ConstrainedProblem, w: ProductPoint, ops: ConstraintOps | None = None):
    """Riemannian gradient of the Lagrangian in ``x`` at the iterate ``w``."""
    ops = ops or ConstraintOps(problem, w.x)
    return LagrangianOps(ops, w.y, w.z).gradx()


def lagrangian_hessvec(
    problem: ConstrainedProblem, w: ProductPoint, dx, ops: ConstraintOps | None = None
):
    """Riemannian Hessian of the Lagrangian in ``x`` applied to ``dx``."""
    ops = ops or ConstraintOps(problem, w.x)
    return LagrangianOps(ops, w.y, w.z).hessvec(dx)
