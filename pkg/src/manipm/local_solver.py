"""Prototype interior point iteration for local-convergence studies.

Each step solves the perturbed Newton system, caps the step length by the
fraction-to-boundary rule so the multipliers and slacks stay strictly
positive, and retracts.  There is no globalization: the point of this solver
is to expose the local rate under the barrier/step-length schedules, so a
divergence guard aborts runs that wander off.

Two schedules are provided.  The quadratic one caps the barrier parameter by
half the squared field norm of the current iterate (and decays the carried
value geometrically), with the boundary fraction approaching one at the same
rate as the field norm shrinks; this exhibits the quadratic tail.  The
superlinear one uses the 1.5-power of the field norm instead, one admissible
choice among the o(|F|) rules.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .kkt import kkt_field, field_norm, kkt_residual
from .linsolve import solve_newton
from .manifolds import ProductPoint, product_norm, product_retract
from .problems import ConstrainedProblem, ConstraintOps
from . import reports
from .reports import SolveReport

QUADRATIC = "quadratic"
SUPERLINEAR = "superlinear"


@dataclass
class LocalConfig:
    gamma_hat: float = 0.5
    mu0: float = 0.1
    tol_kkt: float = 1e-10
    max_iter: int = 100
    cr_tol: float = 1e-9
    cr_max_iter: int = 1000
    schedule: str = QUADRATIC
    divergence_factor: float = 1e6

    def __post_init__(self):
        if not 0.0 < self.gamma_hat < 1.0:
            raise ValueError("gamma_hat must lie in (0, 1)")
        if self.mu0 <= 0.0:
            raise ValueError("mu0 must be positive")
        if self.schedule not in (QUADRATIC, SUPERLINEAR):
            raise ValueError(f"unknown schedule {self.schedule!r}")


def fraction_to_boundary(z, s, dz, ds, gamma: float) -> float:
    """Largest step in (0, 1] keeping ``(z + a dz, s + a ds)`` strictly positive,
    shrunk by the fraction ``gamma``.

    Components moving away from the boundary impose no limit; with none
    moving toward it the full step is returned.
    """
    if np.min(z, initial=np.inf) <= 0.0 or np.min(s, initial=np.inf) <= 0.0:
        raise ValueError("fraction-to-boundary rule needs (z, s) > 0")
    alpha = 1.0
    for val, step in ((s, ds), (z, dz)):
        neg = step < 0
        if np.any(neg):
            alpha = min(alpha, gamma * float(np.min(-val[neg] / step[neg])))
    return alpha


def local_solve(problem: ConstrainedProblem, w0: ProductPoint, config: LocalConfig) -> SolveReport:
    """Run the prototype iteration from ``w0`` until the KKT residual meets
    the tolerance or a budget/divergence guard triggers."""
    t0 = time.monotonic()
    w = w0
    mu_carry = config.mu0
    report = SolveReport(status=reports.MAX_ITERATIONS, iterations=0, wall_time_s=0.0, w=w)
    best_fnorm = np.inf

    for k in range(config.max_iter + 1):
        ops = ConstraintOps(problem, w.x)
        field = kkt_field(problem, w, ops)
        fnorm = field_norm(problem, w, field)
        res = kkt_residual(problem, w, field, ops)
        report.kkt_residuals.append(res)
        report.f_norms.append(fnorm)
        report.iterations = k
        report.w = w

        if res <= config.tol_kkt:
            report.status = reports.SUCCESS
            break
        if k >= config.max_iter:
            report.status = reports.MAX_ITERATIONS
            break
        best_fnorm = min(best_fnorm, fnorm)
        if fnorm > config.divergence_factor * best_fnorm:
            report.status = reports.DIVERGED
            report.message = "field norm grew a million-fold over its best value"
            break

        if config.schedule == QUADRATIC:
            mu = min(mu_carry, 0.5 * fnorm**2)
            mu_carry = mu / 1.5
        else:
            mu = min(mu_carry, fnorm**1.5)
            mu_carry = mu / 1.5
        gamma = max(config.gamma_hat, 1.0 - fnorm)

        try:
            dw, cr = solve_newton(
                problem, w, mu, cr_tol=config.cr_tol, cr_max_iter=config.cr_max_iter,
                field=field, ops=ops,
            )
        except Exception as exc:  # interior violation or rank drop
            report.status = reports.LINEAR_SOLVER_FAILURE
            report.message = str(exc)
            break

        alpha = fraction_to_boundary(w.z, w.s, dw.dz, dw.ds, gamma)
        report.mus.append(mu)
        report.gammas.append(gamma)
        report.alphas.append(alpha)
        report.cr_iterations.append(cr.iterations)
        report.cr_relres.append(cr.relative_residual)
        report.step_norms.append(product_norm(problem.manifold, w, dw))
        w = product_retract(problem.manifold, w, dw, alpha)

    report.wall_time_s = time.monotonic() - t0
    return report
