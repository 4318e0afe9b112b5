"""Globally convergent interior point solver with a merit line search.

Each outer iteration picks the centering pair ``(sigma, rho)``, solves the
perturbed Newton system matrix-free, and then selects a step length in two
stages.  An analytic cap keeps every complementarity product proportionally
centered (each component of the centrality condition is an explicit
quadratic in the step, so the cap is the smallest positive root over the
components).  From that cap a single backtracking loop shrinks the step
until both the second centrality condition, which keeps complementarity
dominant over the field norm, and the Armijo decrease of the squared field
norm hold.

The slope fed to the Armijo test is the closed form
``2 (sigma rho z's - |F|^2)`` valid for the exact Newton direction; the gap
between it and the realized directional derivative is exactly twice the
inner product of the field with the linear-system residual, which the debug
checks account for explicitly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .kkt import (
    complementarity_chain_defect,
    field_norm,
    grad_merit,
    kkt_field,
    kkt_residual,
)
from .linsolve import CONVERGED, newton_residual_correction, solve_newton
from .manifolds import (
    ProductPoint,
    ProductTangent,
    RankDropError,
    product_inner,
    product_norm,
    product_retract,
)
from .problems import ConstrainedProblem, ConstraintOps
from . import reports
from .reports import SolveReport


class LineSearchError(RuntimeError):
    """Backtracking shrank the step below the underflow floor."""


@dataclass
class GlobalConfig:
    beta: float = 1e-4
    theta: float = 0.5
    gamma_init: float = 0.9
    cr_tol: float = 1e-9
    cr_max_iter: int = 1000
    tol_kkt: float = 1e-8
    max_outer: int = 10000
    max_time_seconds: float | None = None
    alpha_min: float = 1e-16
    debug: bool = False
    multiplier_warn: float = 1e8

    def __post_init__(self):
        if not 0.0 < self.beta <= 0.5:
            raise ValueError("beta must lie in (0, 0.5]")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if not 0.5 < self.gamma_init < 1.0:
            raise ValueError("gamma_init must lie in (0.5, 1)")


@dataclass
class CentralityState:
    """Start-point proportionality constants and the shrinking fraction.

    ``tau1`` relates the smallest complementarity product to the average one
    at the start; ``tau2`` relates total complementarity to the field norm.
    ``gamma`` halves its gap to 0.5 every iteration.
    """

    tau1: float
    tau2: float
    gamma: float


def initial_point(problem: ConstrainedProblem, x0, rng: np.random.Generator) -> ProductPoint:
    """Standard start: zero equality multipliers, uniform (0, 1] random
    inequality multipliers and slacks."""
    m, l = problem.n_ineq, problem.n_eq

    def positive_uniform(size):
        v = rng.uniform(size=size)
        while np.any(v == 0.0):
            v[v == 0.0] = rng.uniform(size=int(np.sum(v == 0.0)))
        return v

    return ProductPoint(x0, np.zeros(l), positive_uniform(m), positive_uniform(m))


def select_sigma_rho(fnorm: float, z: np.ndarray, s: np.ndarray) -> tuple[float, float]:
    """Centering exponent and scale: ``rho`` is the average complementarity,
    ``sigma`` the square root of the field norm capped at one half."""
    m = len(z)
    rho = float(z @ s) / m
    sigma = min(0.5, float(np.sqrt(fnorm)))
    if rho > fnorm / np.sqrt(m) * (1.0 + 1e-9) + 1e-300:
        raise AssertionError(
            f"rho left its admissible interval: rho = {rho:.3e}, |F|/sqrt(m) = "
            f"{fnorm / np.sqrt(m):.3e}"
        )
    return sigma, rho


def _smallest_positive_roots(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Componentwise smallest positive root of ``a t^2 + b t + c``; +inf when
    there is none.  A double root counts as the root itself."""
    out = np.full(a.shape, np.inf)

    lin = a == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        lin_root = -c / b
    take = lin & (b != 0.0) & (lin_root > 0.0)
    out[take] = lin_root[take]

    quad = ~lin
    disc = b * b - 4.0 * a * c
    real = quad & (disc >= 0.0)
    sq = np.sqrt(np.where(real, disc, 0.0))
    sgn = np.where(b >= 0.0, 1.0, -1.0)
    q = -0.5 * (b + sgn * sq)
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(real, q / a, np.inf)
        r2 = np.where(real, c / q, np.inf)
    for r in (r1, r2):
        r = np.where(np.isfinite(r) & (r > 0.0), r, np.inf)
        out = np.minimum(out, r)
    return out


def alpha_centrality_I(
    z: np.ndarray, s: np.ndarray, dz: np.ndarray, ds: np.ndarray, gamma: float, tau1: float
) -> float:
    """Analytic cap keeping every complementarity product at least the
    ``gamma tau1`` fraction of the average along the step.

    Each component condition is an explicit quadratic in the step length, so
    the cap is one or the smallest positive root across components.
    """
    m = len(z)
    conv = gamma * tau1 / m
    a = dz * ds - conv * float(dz @ ds)
    b = z * ds + s * dz - conv * float(z @ ds + s @ dz)
    c = z * s - conv * float(z @ s)
    roots = _smallest_positive_roots(a, b, c)
    return float(min(1.0, np.min(roots, initial=np.inf)))


def accept_step(
    problem: ConstrainedProblem,
    w: ProductPoint,
    dw: ProductTangent,
    alpha_bar: float,
    state: CentralityState,
    config: GlobalConfig,
    merit0: float,
    slope: float,
):
    """Backtrack from ``alpha_bar`` until both the complementarity-dominance
    condition and the Armijo decrease hold at the trial point.

    Returns ``(alpha, w_trial, field_trial, fnorm_trial, backtracks)``.
    """
    alpha = min(alpha_bar, 1.0)
    backtracks = 0
    while alpha >= config.alpha_min:
        try:
            trial = product_retract(problem.manifold, w, dw, alpha)
        except RankDropError:
            alpha *= config.theta
            backtracks += 1
            continue
        field = kkt_field(problem, trial)
        fnorm = field_norm(problem, trial, field)
        f2 = float(trial.z @ trial.s) - state.gamma * state.tau2 * fnorm
        armijo = fnorm**2 - merit0 <= alpha * config.beta * slope
        if f2 >= 0.0 and armijo:
            return alpha, trial, field, fnorm, backtracks
        alpha *= config.theta
        backtracks += 1
    raise LineSearchError(f"step length underflowed below {config.alpha_min:.1e}")


def global_solve(problem: ConstrainedProblem, w0: ProductPoint, config: GlobalConfig) -> SolveReport:
    """Outer loop of the globalized solver; see the module docstring."""
    t0 = time.monotonic()
    w = w0
    state: CentralityState | None = None
    report = SolveReport(status=reports.MAX_ITERATIONS, iterations=0, wall_time_s=0.0, w=w)
    warned_multipliers = False

    for k in range(config.max_outer + 1):
        ops = ConstraintOps(problem, w.x)
        field = kkt_field(problem, w, ops)
        fnorm = field_norm(problem, w, field)
        res = kkt_residual(problem, w, field, ops)
        report.kkt_residuals.append(res)
        report.f_norms.append(fnorm)
        report.iterations = k
        report.w = w

        if state is None:
            zs = w.z * w.s
            state = CentralityState(
                tau1=float(np.min(zs) / (np.mean(zs))),
                tau2=float(w.z @ w.s) / fnorm if fnorm > 0 else 0.0,
                gamma=config.gamma_init,
            )

        if res <= config.tol_kkt:
            report.status = reports.SUCCESS
            break
        if k >= config.max_outer:
            report.status = reports.MAX_ITERATIONS
            break
        elapsed = time.monotonic() - t0
        if config.max_time_seconds is not None and elapsed > config.max_time_seconds:
            report.status = reports.TIME_LIMIT
            break

        sigma, rho = select_sigma_rho(fnorm, w.z, w.s)
        mu = sigma * rho
        try:
            dw, cr = solve_newton(
                problem, w, mu, cr_tol=config.cr_tol, cr_max_iter=config.cr_max_iter,
                field=field, ops=ops,
            )
        except Exception as exc:
            report.status = reports.LINEAR_SOLVER_FAILURE
            report.message = str(exc)
            break

        closed_slope = 2.0 * (-(fnorm**2) + mu * float(w.z @ w.s))
        corr = newton_residual_correction(problem, w, field, cr)
        exact_slope = closed_slope - 2.0 * corr
        if exact_slope >= 0.0:
            report.status = reports.LINEAR_SOLVER_FAILURE
            report.message = (
                f"inexact direction is not a descent direction (cr status {cr.status})"
            )
            break
        if cr.status != CONVERGED:
            report.warnings.append(
                f"iter {k}: linear solve {cr.status} at relative residual "
                f"{cr.relative_residual:.2e}; direction still descends, continuing"
            )

        state.gamma = 0.5 * (state.gamma + 0.5)
        alpha_bar = alpha_centrality_I(w.z, w.s, dw.dz, dw.ds, state.gamma, state.tau1)
        try:
            alpha, w_new, field_new, fnorm_new, _ = accept_step(
                problem, w, dw, alpha_bar, state, config, fnorm**2, closed_slope
            )
        except LineSearchError as exc:
            report.status = reports.LINE_SEARCH_FAILURE
            report.message = str(exc)
            break

        if config.debug:
            _debug_checks(
                problem, w, dw, field, fnorm, sigma, mu, corr, state, config,
                alpha, w_new, fnorm_new, k, report, ops,
            )
        if not warned_multipliers and np.max(np.abs(w_new.z), initial=0.0) > config.multiplier_warn:
            report.warnings.append(
                f"iter {k}: inequality multipliers exceeded {config.multiplier_warn:.1e}"
            )
            warned_multipliers = True

        report.sigmas.append(sigma)
        report.mus.append(mu)
        report.gammas.append(state.gamma)
        report.alphas.append(alpha)
        report.cr_iterations.append(cr.iterations)
        report.cr_relres.append(cr.relative_residual)
        report.step_norms.append(product_norm(problem.manifold, w, dw))
        w = w_new

    report.wall_time_s = time.monotonic() - t0
    return report


def _debug_checks(
    problem, w, dw, field, fnorm, sigma, mu, corr, state, config,
    alpha, w_new, fnorm_new, k, report, ops,
):
    """Per-iteration invariant assertions; violations are collected, not raised."""
    bad = report.debug_violations
    zts = float(w.z @ w.s)

    # Directional-derivative identity for the realized direction.  The exact
    # slope equals the closed form minus twice the field/residual pairing, so
    # the adjoint-route computation must match that corrected value.
    lhs = product_inner(problem.manifold, w, grad_merit(problem, w, field, ops), dw)
    closed = 2.0 * (-(fnorm**2) + mu * zts)
    corrected = closed - 2.0 * corr
    scale = max(1.0, abs(lhs), abs(corrected))
    if abs(lhs - corrected) > 1e-10 * scale:
        bad.append(
            f"iter {k}: slope identity off by {abs(lhs - corrected) / scale:.2e} (relative)"
        )
    raw_gap = abs(lhs - closed) / scale
    report.debug_stats["slope_identity_raw_max"] = max(
        report.debug_stats.get("slope_identity_raw_max", 0.0), raw_gap
    )

    # Merit decrease bound implied by Armijo with the closed-form slope.
    bound = (1.0 - 2.0 * alpha * config.beta * (1.0 - sigma)) * fnorm**2
    if fnorm_new**2 > bound * (1.0 + 1e-12) + 1e-300:
        bad.append(f"iter {k}: merit decrease bound violated: {fnorm_new**2:.6e} > {bound:.6e}")

    # Centrality conditions at the accepted step and strict interior.
    zs_new = w_new.z * w_new.s
    f1 = float(np.min(zs_new)) - state.gamma * state.tau1 * float(np.mean(zs_new))
    if f1 < -1e-12 * max(1.0, float(np.sum(zs_new))):
        bad.append(f"iter {k}: proportional centrality violated by {f1:.2e}")
    f2 = float(w_new.z @ w_new.s) - state.gamma * state.tau2 * fnorm_new
    if f2 < -1e-12 * max(1.0, float(w_new.z @ w_new.s)):
        bad.append(f"iter {k}: complementarity dominance violated by {f2:.2e}")
    if np.min(w_new.z) <= 0.0 or np.min(w_new.s) <= 0.0:
        bad.append(f"iter {k}: iterate left the strict interior")

    # Norm chain between complementarity and the field norm.
    defect = complementarity_chain_defect(w_new, fnorm_new)
    if defect > 1e-12 * max(1.0, fnorm_new):
        bad.append(f"iter {k}: complementarity norm chain violated by {defect:.2e}")
