"""Geometry kernels for embedded matrix manifolds.

All manifolds here are embedded in a real matrix space and carry the metric
inherited from the ambient trace inner product ``<a, b> = trace(a' b)``.
Points and tangent vectors of the Euclidean, Stiefel and oblique manifolds
are plain ``numpy`` arrays in ambient coordinates.  The fixed-rank manifold
stores points in factored SVD form and tangent vectors in the structured
triple ``(M, Up, Vp)`` so that repeated linear combinations of tangent
vectors cannot inflate the rank; the ambient form ``U M V' + Up V' + U Vp'``
is materialized only where a computation genuinely needs it.

The module also provides the product space ``M x R^l x R^m x R^m`` used by
the interior point iterations: points ``(x, y, z, s)``, tangents
``(dx, dy, dz, ds)``, and the retraction that moves the matrix block along
the manifold retraction while the vector blocks move linearly.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np


class RankDropError(RuntimeError):
    """Retracting on the fixed-rank manifold hit a singular-value tie at rank r."""


class GramSchmidtError(RuntimeError):
    """Random tangent vectors stayed numerically dependent after resampling."""


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _qf(a: np.ndarray) -> np.ndarray:
    """Thin QR factor with the R-diagonal forced positive (deterministic sign)."""
    q, r = np.linalg.qr(a)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


@dataclass
class FixedRankPoint:
    """Rank-r matrix in factored form ``X = U diag(s) V'``.

    ``u`` is m-by-r column-orthonormal, ``s`` the positive singular values,
    ``v`` n-by-r column-orthonormal.
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    def ambient(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T


@dataclass
class FixedRankTangent:
    """Structured tangent vector ``U M V' + Up V' + U Vp'`` at a fixed-rank point.

    ``Up`` and ``Vp`` satisfy ``U' Up = 0`` and ``V' Vp = 0``; under these
    orthogonality relations the ambient trace inner product of two tangents
    reduces to the sum of the blockwise Frobenius products.
    """

    m: np.ndarray
    up: np.ndarray
    vp: np.ndarray

    def __add__(self, other: "FixedRankTangent") -> "FixedRankTangent":
        return FixedRankTangent(self.m + other.m, self.up + other.up, self.vp + other.vp)

    def __sub__(self, other: "FixedRankTangent") -> "FixedRankTangent":
        return FixedRankTangent(self.m - other.m, self.up - other.up, self.vp - other.vp)

    def __mul__(self, c: float) -> "FixedRankTangent":
        return FixedRankTangent(self.m * c, self.up * c, self.vp * c)

    __rmul__ = __mul__

    def __neg__(self) -> "FixedRankTangent":
        return FixedRankTangent(-self.m, -self.up, -self.vp)


class Manifold(ABC):
    """Embedded matrix manifold with the ambient trace metric."""

    dim: int
    ambient_shape: tuple[int, int]

    def inner(self, x, xi, eta) -> float:
        """Riemannian inner product of two tangent vectors at ``x``."""
        if np.shape(xi) != np.shape(eta):
            raise ValueError(f"tangent shape mismatch: {np.shape(xi)} vs {np.shape(eta)}")
        return float(np.tensordot(xi, eta))

    def norm(self, x, xi) -> float:
        return float(np.sqrt(max(self.inner(x, xi, xi), 0.0)))

    @abstractmethod
    def proj(self, x, u):
        """Orthogonal projection of an ambient matrix onto the tangent space."""

    @abstractmethod
    def retract(self, x, xi):
        """Retract the tangent vector ``xi`` at ``x`` back onto the manifold."""

    def retract_second_order(self, x, xi):
        """Retraction curve with vanishing (normal) acceleration at t = 0.

        Agrees with :meth:`retract` to first order; derivative checks that
        compare function values against the quadratic model must walk this
        curve.  Defaults to :meth:`retract`, which is already a metric
        projection (hence second order) for most manifolds here.
        """
        return self.retract(x, xi)

    def egrad2rgrad(self, x, egrad):
        """Riemannian gradient from the ambient gradient."""
        return self.proj(x, egrad)

    @abstractmethod
    def ehess2rhess(self, x, egrad, ehess_xi, xi):
        """Riemannian Hessian applied to ``xi``, from ambient derivatives.

        ``egrad`` is the ambient gradient at ``x`` and ``ehess_xi`` the ambient
        Hessian applied to the ambient form of the tangent vector ``xi``.
        """

    @abstractmethod
    def rand_point(self, rng: np.random.Generator):
        """Random point on the manifold."""

    def rand_tangent(self, x, rng: np.random.Generator):
        """Unit-norm random tangent vector at ``x``."""
        xi = self.proj(x, rng.standard_normal(self.ambient_shape))
        nrm = self.norm(x, xi)
        if nrm == 0.0:
            raise GramSchmidtError("random tangent collapsed to zero under projection")
        return xi * (1.0 / nrm)

    def zero_tangent(self, x):
        return np.zeros(self.ambient_shape)

    def to_ambient(self, x, xi) -> np.ndarray:
        """Ambient matrix form of a tangent vector."""
        return xi

    def point_ambient(self, x) -> np.ndarray:
        """Ambient matrix form of a point."""
        return x

    def feasibility_defect(self, x) -> float:
        """How far ``x`` is from satisfying the manifold's defining equations."""
        return 0.0

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return f"{type(self).__name__}{self.ambient_shape}"


class Euclidean(Manifold):
    """The matrix space R^{m x n} viewed as a trivial manifold."""

    def __init__(self, m: int, n: int):
        if m <= 0 or n <= 0:
            raise ValueError("dimensions must be positive")
        self.ambient_shape = (m, n)
        self.dim = m * n

    def proj(self, x, u):
        return u

    def retract(self, x, xi):
        return x + xi

    def ehess2rhess(self, x, egrad, ehess_xi, xi):
        return ehess_xi

    def rand_point(self, rng):
        return rng.standard_normal(self.ambient_shape)


class Stiefel(Manifold):
    """Matrices with orthonormal columns, ``X' X = I_k``.

    The production retraction is the thin QR factor of ``X + xi`` with the
    R-diagonal sign fixed positive.  QR is only a first-order retraction, so
    :meth:`retract_second_order` uses the polar factor (the metric
    projection) instead.
    """

    def __init__(self, n: int, k: int):
        if k > n or k <= 0:
            raise ValueError(f"need 0 < k <= n, got (n, k) = ({n}, {k})")
        self.ambient_shape = (n, k)
        self.dim = n * k - k * (k + 1) // 2

    def proj(self, x, u):
        return u - x @ _sym(x.T @ u)

    def retract(self, x, xi):
        return _qf(x + xi)

    def retract_second_order(self, x, xi):
        u, _, vt = np.linalg.svd(x + xi, full_matrices=False)
        return u @ vt

    def ehess2rhess(self, x, egrad, ehess_xi, xi):
        return self.proj(x, ehess_xi - xi @ _sym(x.T @ egrad))

    def rand_point(self, rng):
        return _qf(rng.standard_normal(self.ambient_shape))

    def feasibility_defect(self, x) -> float:
        k = self.ambient_shape[1]
        return float(np.linalg.norm(x.T @ x - np.eye(k)))


class Oblique(Manifold):
    """Matrices with unit-norm columns; a product of k spheres S^{n-1}."""

    def __init__(self, n: int, k: int):
        if n <= 0 or k <= 0:
            raise ValueError("dimensions must be positive")
        self.ambient_shape = (n, k)
        self.dim = k * (n - 1)

    @staticmethod
    def _coldots(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.sum(a * b, axis=0, keepdims=True)

    def proj(self, x, u):
        return u - x * self._coldots(x, u)

    def retract(self, x, xi):
        a = x + xi
        return a / np.linalg.norm(a, axis=0, keepdims=True)

    def ehess2rhess(self, x, egrad, ehess_xi, xi):
        return self.proj(x, ehess_xi) - xi * self._coldots(x, egrad)

    def rand_point(self, rng):
        a = rng.standard_normal(self.ambient_shape)
        return a / np.linalg.norm(a, axis=0, keepdims=True)

    def feasibility_defect(self, x) -> float:
        return float(np.max(np.abs(np.sum(x * x, axis=0) - 1.0)))


class FixedRank(Manifold):
    """Matrices of exactly rank r in R^{m x n}, embedded geometry.

    The retraction is the metric projection: the rank-r truncated SVD of
    ``X + xi``.  A tie between the r-th and (r+1)-st singular values of the
    retracted matrix means the truncation would silently leave the manifold,
    so it raises :class:`RankDropError` instead.
    """

    def __init__(self, m: int, n: int, r: int):
        if r <= 0 or r >= min(m, n):
            raise ValueError(f"need 0 < r < min(m, n), got (m, n, r) = ({m}, {n}, {r})")
        self.ambient_shape = (m, n)
        self.r = r
        self.dim = (m + n - r) * r

    def inner(self, x, xi, eta) -> float:
        return float(
            np.tensordot(xi.m, eta.m)
            + np.tensordot(xi.up, eta.up)
            + np.tensordot(xi.vp, eta.vp)
        )

    def proj(self, x: FixedRankPoint, u) -> FixedRankTangent:
        if isinstance(u, FixedRankTangent):
            u = self.to_ambient(x, u)
        uv = u @ x.v
        utu = u.T @ x.u
        m = x.u.T @ uv
        up = uv - x.u @ m
        vp = utu - x.v @ (x.v.T @ utu)
        return FixedRankTangent(m, up, vp)

    def retract(self, x: FixedRankPoint, xi: FixedRankTangent) -> FixedRankPoint:
        a = x.ambient() + self.to_ambient(x, xi)
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        r = self.r
        if s[r - 1] - s[r] <= 1e-12:
            raise RankDropError(
                f"singular-value tie at rank {r}: s_r = {s[r - 1]:.3e}, s_r+1 = {s[r]:.3e}"
            )
        return FixedRankPoint(u[:, :r], s[:r].copy(), vt[:r].T)

    def ehess2rhess(self, x, egrad, ehess_xi, xi):
        out = self.proj(x, ehess_xi)
        # Curvature (Weingarten) correction; only the normal part of egrad
        # survives the complementary projections.
        t = (egrad @ xi.vp) / x.s
        out.up += t - x.u @ (x.u.T @ t)
        t = (egrad.T @ xi.up) / x.s
        out.vp += t - x.v @ (x.v.T @ t)
        return out

    def rand_point(self, rng) -> FixedRankPoint:
        a = rng.standard_normal(self.ambient_shape)
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        r = self.r
        return FixedRankPoint(u[:, :r], s[:r].copy(), vt[:r].T)

    def rand_tangent(self, x, rng) -> FixedRankTangent:
        xi = self.proj(x, rng.standard_normal(self.ambient_shape))
        nrm = self.norm(x, xi)
        if nrm == 0.0:
            raise GramSchmidtError("random tangent collapsed to zero under projection")
        return xi * (1.0 / nrm)

    def zero_tangent(self, x) -> FixedRankTangent:
        m, n = self.ambient_shape
        r = self.r
        return FixedRankTangent(np.zeros((r, r)), np.zeros((m, r)), np.zeros((n, r)))

    def to_ambient(self, x: FixedRankPoint, xi: FixedRankTangent) -> np.ndarray:
        return x.u @ xi.m @ x.v.T + xi.up @ x.v.T + x.u @ xi.vp.T

    def point_ambient(self, x: FixedRankPoint) -> np.ndarray:
        return x.ambient()

    def feasibility_defect(self, x: FixedRankPoint) -> float:
        r = self.r
        du = np.linalg.norm(x.u.T @ x.u - np.eye(r))
        dv = np.linalg.norm(x.v.T @ x.v - np.eye(r))
        ds = 0.0 if np.all(x.s > 0) else float(np.max(-x.s))
        return float(max(du, dv, ds))


def truncated_svd(a: np.ndarray, r: int) -> FixedRankPoint:
    """Best rank-r approximation of ``a`` as a factored fixed-rank point."""
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return FixedRankPoint(u[:, :r], s[:r].copy(), vt[:r].T)


def flatten_tangent(manifold: Manifold, x, xi) -> np.ndarray:
    """Tangent vector as a flat ambient coordinate vector (row-major).

    Isometric for every manifold here: the embedded metric is the ambient
    trace inner product, and the structured fixed-rank representation
    preserves it.
    """
    return manifold.to_ambient(x, xi).ravel()


def orthonormal_basis(manifold: Manifold, x, rng: np.random.Generator, max_attempts: int = 5):
    """Orthonormal basis of the tangent space at ``x``.

    Projects ``dim`` random ambient matrices and orthonormalizes them by
    Gram-Schmidt with one re-orthogonalization pass.  If the projected
    vectors come out numerically dependent (residual column norm below
    1e-12) the whole draw is resampled, up to ``max_attempts`` times.
    """
    d = manifold.dim
    shape = manifold.ambient_shape
    for _ in range(max_attempts):
        cols = np.column_stack(
            [flatten_tangent(manifold, x, manifold.rand_tangent(x, rng)) for _ in range(d)]
        )
        q = _gram_schmidt(cols)
        if q is None:
            continue
        return [manifold.proj(x, q[:, j].reshape(shape)) for j in range(d)]
    raise GramSchmidtError(f"dependent tangent sample after {max_attempts} attempts")


def _gram_schmidt(a: np.ndarray, tol: float = 1e-12):
    """Column-wise Gram-Schmidt with one re-orthogonalization pass.

    Returns the orthonormalized matrix, or None on a dependent column.
    """
    q = np.array(a, dtype=float)
    for j in range(q.shape[1]):
        v = q[:, j]
        for _ in range(2):
            if j:
                v = v - q[:, :j] @ (q[:, :j].T @ v)
        nrm = np.linalg.norm(v)
        if nrm <= tol:
            return None
        q[:, j] = v / nrm
    return q


# ---------------------------------------------------------------------------
# Product space M x R^l x R^m x R^m


@dataclass
class ProductPoint:
    """Iterate ``(x, y, z, s)``: manifold point, equality and inequality
    multipliers, and slacks."""

    x: object
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray


@dataclass
class ProductTangent:
    """Element ``(dx, dy, dz, ds)`` of the tangent space at a product point."""

    dx: object
    dy: np.ndarray
    dz: np.ndarray
    ds: np.ndarray

    def __add__(self, other: "ProductTangent") -> "ProductTangent":
        return ProductTangent(
            self.dx + other.dx, self.dy + other.dy, self.dz + other.dz, self.ds + other.ds
        )

    def __sub__(self, other: "ProductTangent") -> "ProductTangent":
        return ProductTangent(
            self.dx - other.dx, self.dy - other.dy, self.dz - other.dz, self.ds - other.ds
        )

    def __mul__(self, c: float) -> "ProductTangent":
        return ProductTangent(self.dx * c, self.dy * c, self.dz * c, self.ds * c)

    __rmul__ = __mul__

    def __neg__(self) -> "ProductTangent":
        return ProductTangent(-self.dx, -self.dy, -self.dz, -self.ds)


def product_inner(manifold: Manifold, w: ProductPoint, a: ProductTangent, b: ProductTangent) -> float:
    return (
        manifold.inner(w.x, a.dx, b.dx)
        + float(a.dy @ b.dy)
        + float(a.dz @ b.dz)
        + float(a.ds @ b.ds)
    )


def product_norm(manifold: Manifold, w: ProductPoint, a: ProductTangent) -> float:
    return float(np.sqrt(max(product_inner(manifold, w, a, a), 0.0)))


def product_retract(
    manifold: Manifold, w: ProductPoint, dw: ProductTangent, alpha: float = 1.0
) -> ProductPoint:
    """Move the matrix block along the manifold retraction, the rest linearly."""
    return ProductPoint(
        manifold.retract(w.x, dw.dx * alpha),
        w.y + alpha * dw.dy,
        w.z + alpha * dw.dz,
        w.s + alpha * dw.ds,
    )


def zero_product_tangent(manifold: Manifold, w: ProductPoint) -> ProductTangent:
    return ProductTangent(
        manifold.zero_tangent(w.x),
        np.zeros_like(w.y),
        np.zeros_like(w.z),
        np.zeros_like(w.s),
    )


def rand_product_tangent(
    manifold: Manifold, w: ProductPoint, rng: np.random.Generator
) -> ProductTangent:
    """Unit-norm random tangent on the product space."""
    dw = ProductTangent(
        manifold.proj(w.x, rng.standard_normal(manifold.ambient_shape)),
        rng.standard_normal(w.y.shape),
        rng.standard_normal(w.z.shape),
        rng.standard_normal(w.s.shape),
    )
    return dw * (1.0 / product_norm(manifold, w, dw))
