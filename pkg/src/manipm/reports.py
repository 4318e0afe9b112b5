"""Per-solve diagnostics shared by the local and global solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .manifolds import ProductPoint

SUCCESS = "success"
MAX_ITERATIONS = "max_iterations"
TIME_LIMIT = "time_limit"
LINE_SEARCH_FAILURE = "line_search_failure"
LINEAR_SOLVER_FAILURE = "linear_solver_failure"
DIVERGED = "diverged"

TRACE_COLUMNS = (
    "iter",
    "kkt_residual",
    "f_norm",
    "alpha",
    "sigma",
    "mu",
    "gamma",
    "cr_iters",
    "cr_relres",
)


@dataclass
class SolveReport:
    """Outcome of one interior point run.

    The trajectory lists hold one entry per outer iterate (including the
    final one, for the residual histories) so convergence rates can be fit
    offline.
    """

    status: str
    iterations: int
    wall_time_s: float
    w: ProductPoint
    kkt_residuals: list[float] = field(default_factory=list)
    f_norms: list[float] = field(default_factory=list)
    alphas: list[float] = field(default_factory=list)
    sigmas: list[float] = field(default_factory=list)
    mus: list[float] = field(default_factory=list)
    gammas: list[float] = field(default_factory=list)
    cr_iterations: list[int] = field(default_factory=list)
    cr_relres: list[float] = field(default_factory=list)
    step_norms: list[float] = field(default_factory=list)
    debug_violations: list[str] = field(default_factory=list)
    debug_stats: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    message: str = ""

    @property
    def final_kkt_residual(self) -> float:
        return self.kkt_residuals[-1] if self.kkt_residuals else float("nan")

    @property
    def cr_iters_total(self) -> int:
        return int(sum(self.cr_iterations))

    def trace_rows(self):
        """Per-iteration rows matching TRACE_COLUMNS (padded where a series
        is one element shorter because no step was taken from the last
        iterate)."""
        n = len(self.kkt_residuals)

        def pick(seq, i):
            return seq[i] if i < len(seq) else float("nan")

        for i in range(n):
            yield (
                i,
                self.kkt_residuals[i],
                pick(self.f_norms, i),
                pick(self.alphas, i),
                pick(self.sigmas, i),
                pick(self.mus, i),
                pick(self.gammas, i),
                int(pick(self.cr_iterations, i)) if i < len(self.cr_iterations) else "",
                pick(self.cr_relres, i),
            )

    def summary(self) -> str:
        err = self.final_kkt_residual
        return (
            f"status={self.status} iterations={self.iterations} "
            f"kkt_residual={err:.3e} time={self.wall_time_s:.3f}s "
            f"cr_total={self.cr_iters_total}"
        )


def final_x_ambient(report: SolveReport, manifold) -> np.ndarray:
    return manifold.point_ambient(report.w.x)
