"""Benchmark problem generators.

Three families:

* nonnegative low-rank approximation: minimize ``|A - X|_F^2`` over the
  fixed-rank manifold subject to ``X >= 0``, where ``A`` is a random
  nonnegative product ``L R`` plus optional Gaussian noise.  Without noise
  the data matrix itself is the solution.
* nonnegative Stiefel projection: minimize ``-2 trace(X' C)`` over the
  Stiefel manifold subject to ``X >= 0``, with ``C`` built so the solution
  is known and unique (disjoint column supports).
* the oblique reformulation of the same projection: the Stiefel constraint
  is relaxed to unit-norm columns plus one scalar equality
  ``|X V|_F^2 = 1`` with an entrywise-positive ``V V'``.

Each generator draws everything from the supplied seed or generator, so a
fixed seed reproduces the instance bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .manifolds import FixedRank, Oblique, Stiefel, truncated_svd
from .problems import (
    ComponentConstraints,
    ConstrainedProblem,
    ElementwiseNonnegativity,
    Objective,
    no_constraints,
)

NLRM = "nlrm"
MODEL_ST = "model_st"
MODEL_OB = "model_ob"
PROBLEM_NAMES = (NLRM, MODEL_ST, MODEL_OB)


@dataclass
class BenchmarkInstance:
    """A generated problem with its initial point and ground-truth data.

    ``solution`` is the known minimizer in ambient coordinates when one
    exists (the noiseless low-rank data matrix, or the constructed
    nonnegative orthonormal factor), else None.
    """

    problem: ConstrainedProblem
    x0: object
    data: np.ndarray
    solution: np.ndarray | None


def gen_nlrm(m: int, n: int, r: int, sigma: float, seed) -> BenchmarkInstance:
    """Nonnegative low-rank approximation instance on the rank-r manifold.

    ``A = L R`` with uniform [0, 1] factors, plus Gaussian noise of standard
    deviation ``sigma``; the initial point is the rank-r truncation of the
    entrywise absolute value of a Gaussian matrix.
    """
    rng = np.random.default_rng(seed)
    left = rng.uniform(size=(m, r))
    right = rng.uniform(size=(r, n))
    a = left @ right
    if sigma > 0:
        a = a + sigma * rng.standard_normal((m, n))

    manifold = FixedRank(m, n, r)
    objective = Objective(
        value=lambda x: float(np.sum((a - x) ** 2)),
        egrad=lambda x: 2.0 * (x - a),
        ehess_vec=lambda x, xi: 2.0 * xi,
    )
    problem = ConstrainedProblem(
        manifold=manifold,
        objective=objective,
        inequality=ElementwiseNonnegativity((m, n)),
        equality=no_constraints((m, n)),
    )
    x0 = truncated_svd(np.abs(rng.standard_normal((m, n))), r)
    solution = a if sigma == 0 else None
    return BenchmarkInstance(problem, x0, a, solution)


def _projection_target(n: int, k: int, rng: np.random.Generator, max_attempts: int = 50):
    """Construct ``(C, X*)`` with a unique known nonnegative orthonormal
    minimizer.

    A feasible nonnegative orthonormal matrix needs disjoint column
    supports, so the rows are partitioned uniformly at random into k
    nonempty groups; entries on each group are positive, columns are
    normalized, and ``C = X* L'`` for a diagonally dominated random ``L``.
    """
    for _ in range(max_attempts):
        groups = rng.integers(k, size=n)
        if len(np.unique(groups)) < k:
            continue
        b = np.zeros((n, k))
        for j in range(k):
            rows = groups == j
            b[rows, j] = rng.uniform(0.5, 1.5, size=int(np.sum(rows)))
        b = b / np.linalg.norm(b, axis=0, keepdims=True)

        x1 = (b > 0) * (1.0 + rng.uniform(size=(n, k)))
        xstar = x1 / np.linalg.norm(x1, axis=0, keepdims=True)
        l_mat = rng.uniform(size=(k, k)) + k * np.eye(k)
        c = xstar @ l_mat.T
        return c, xstar
    raise RuntimeError(f"failed to draw a support partition of {n} rows into {k} groups")


def _polar_factor(c: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(c, full_matrices=False)
    return u @ vt


def _trace_objective(c: np.ndarray) -> Objective:
    shape = c.shape
    return Objective(
        value=lambda x: -2.0 * float(np.tensordot(x, c)),
        egrad=lambda x: -2.0 * c,
        ehess_vec=lambda x, xi: np.zeros(shape),
    )


def gen_model_st(n: int, k: int, seed) -> BenchmarkInstance:
    """Nonnegative projection onto the Stiefel manifold with known solution."""
    rng = np.random.default_rng(seed)
    c, xstar = _projection_target(n, k, rng)
    problem = ConstrainedProblem(
        manifold=Stiefel(n, k),
        objective=_trace_objective(c),
        inequality=ElementwiseNonnegativity((n, k)),
        equality=no_constraints((n, k)),
    )
    return BenchmarkInstance(problem, _polar_factor(c), c, xstar)


def gen_model_ob(n: int, k: int, seed, max_attempts: int = 50) -> BenchmarkInstance:
    """Oblique-manifold reformulation of the nonnegative projection.

    Keeps the same ``(C, X*)`` construction; the orthonormality is traded
    for unit-norm columns plus the single smooth equality
    ``|X V|_F^2 - 1 = 0`` with ``V`` the normalized all-ones vector.
    """
    rng = np.random.default_rng(seed)
    v = np.ones((k, 1)) / np.sqrt(k)
    vvt = v @ v.T
    for _ in range(max_attempts):
        c, xstar = _projection_target(n, k, rng)
        if abs(float(np.sum((xstar @ v) ** 2)) - 1.0) <= 1e-10:
            break
    else:
        raise RuntimeError("constructed solution kept violating the norm equality")

    h = Objective(
        value=lambda x: float(np.sum((x @ v) ** 2)) - 1.0,
        egrad=lambda x: 2.0 * (x @ vvt),
        ehess_vec=lambda x, xi: 2.0 * (xi @ vvt),
    )
    problem = ConstrainedProblem(
        manifold=Oblique(n, k),
        objective=_trace_objective(c),
        inequality=ElementwiseNonnegativity((n, k)),
        equality=ComponentConstraints([h], (n, k)),
    )
    x0 = _polar_factor(c)
    x0 = x0 / np.linalg.norm(x0, axis=0, keepdims=True)
    return BenchmarkInstance(problem, x0, c, xstar)


def generate(problem: str, dims: tuple, noise: float, seed) -> BenchmarkInstance:
    """Dispatch by problem name; ``dims`` is (m, n, r) or (n, k)."""
    if problem == NLRM:
        m, n, r = dims
        return gen_nlrm(m, n, r, noise, seed)
    if problem == MODEL_ST:
        n, k = dims
        return gen_model_st(n, k, seed)
    if problem == MODEL_OB:
        n, k = dims
        return gen_model_ob(n, k, seed)
    raise ValueError(f"unknown problem {problem!r}; expected one of {PROBLEM_NAMES}")
