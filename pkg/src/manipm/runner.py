"""Trial harness: run solver trials over instance specifications, collect
per-trial rows, aggregate, and write CSV.

Every trial derives its own generator deterministically from the spec seed
and the trial index, regenerates the instance, draws the initial multipliers
and solves.  Results are merged in (spec, trial) order no matter how many
worker processes ran them, and the CSV is byte-reproducible for a fixed
suite and seed (timing values are recorded but are obviously not part of
that reproducibility).
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .benchmarks import MODEL_OB, MODEL_ST, NLRM, PROBLEM_NAMES, generate
from .global_solver import GlobalConfig, global_solve, initial_point
from . import reports

CSV_HEADER = (
    "problem",
    "dims",
    "noise",
    "seed",
    "trial",
    "status",
    "iters",
    "time_s",
    "kkt_residual",
    "error",
)

ALLOWED_NOISE = (0.0, 0.001, 0.01)


@dataclass(frozen=True)
class InstanceSpec:
    """One benchmark configuration: problem family, sizes, and budgets."""

    problem: str
    dims: tuple
    noise: float = 0.0
    seed: int = 0
    tol_kkt: float = 1e-8
    t_max_seconds: float = 180.0
    max_outer: int = 10000

    def __post_init__(self):
        if self.problem not in PROBLEM_NAMES:
            raise ValueError(f"unknown problem {self.problem!r}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if any(d <= 0 for d in self.dims):
            raise ValueError("dims must be positive")
        if self.problem == NLRM:
            if len(self.dims) != 3:
                raise ValueError("nlrm needs dims (m, n, r)")
            m, n, r = self.dims
            if r >= min(m, n):
                raise ValueError("need r < min(m, n)")
            if self.noise not in ALLOWED_NOISE:
                raise ValueError(f"noise must be one of {ALLOWED_NOISE}")
        else:
            if len(self.dims) != 2:
                raise ValueError(f"{self.problem} needs dims (n, k)")
            n, k = self.dims
            if k > n:
                raise ValueError("need k <= n")
            if self.noise != 0.0:
                raise ValueError(f"{self.problem} takes no noise")

    def dims_label(self) -> str:
        return "x".join(str(d) for d in self.dims)


@dataclass
class TrialResult:
    spec: InstanceSpec
    trial_index: int
    status: str
    outer_iters: int
    wall_time_seconds: float
    final_kkt_residual: float
    final_error: float | None
    cr_iters_total: int

    @property
    def success(self) -> bool:
        return self.status == reports.SUCCESS


def run_trial(spec: InstanceSpec, trial_index: int, debug: bool = False) -> TrialResult:
    """Generate and solve one trial; failures become statuses, not raises."""
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, trial_index)))
    instance = generate(spec.problem, spec.dims, spec.noise, rng)
    w0 = initial_point(instance.problem, instance.x0, rng)
    config = GlobalConfig(
        tol_kkt=spec.tol_kkt,
        max_outer=spec.max_outer,
        max_time_seconds=spec.t_max_seconds,
        debug=debug,
    )
    t0 = time.monotonic()
    report = global_solve(instance.problem, w0, config)
    elapsed = time.monotonic() - t0

    error = None
    if instance.solution is not None:
        xt = instance.problem.manifold.point_ambient(report.w.x)
        error = float(np.linalg.norm(xt - instance.solution))
    return TrialResult(
        spec=spec,
        trial_index=trial_index,
        status=report.status,
        outer_iters=report.iterations,
        wall_time_seconds=elapsed,
        final_kkt_residual=report.final_kkt_residual,
        final_error=error,
        cr_iters_total=report.cr_iters_total,
    )


def _run_trial_task(args):
    spec, trial_index = args
    return run_trial(spec, trial_index)


def run_bench(
    specs: list[InstanceSpec], trials: int, jobs: int = 1
) -> list[TrialResult]:
    """Run ``trials`` trials of every spec, optionally across processes.

    The result list is ordered by (spec position, trial index) regardless of
    scheduling.
    """
    tasks = [(spec, t) for spec in specs for t in range(trials)]
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_trial_task(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_trial_task, tasks))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def results_csv(results: list[TrialResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in results:
        writer.writerow(
            [
                r.spec.problem,
                r.spec.dims_label(),
                _fmt(r.spec.noise),
                r.spec.seed,
                r.trial_index,
                r.status,
                r.outer_iters,
                _fmt(r.wall_time_seconds),
                _fmt(r.final_kkt_residual),
                _fmt(r.final_error),
            ]
        )
    return buf.getvalue()


def write_csv(results: list[TrialResult], path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(results_csv(results))


@dataclass
class AggregateRow:
    """Per-spec summary over its trials.

    Time and iteration means cover successful trials only (the convention
    the benchmark follows); ``total_time_s`` additionally accounts for every
    trial, successful or not.
    """

    spec: InstanceSpec
    trials: int
    success_rate: float
    mean_time_s: float | None
    mean_iters: float | None
    mean_error: float | None
    total_time_s: float


def aggregate(results: list[TrialResult]) -> list[AggregateRow]:
    rows = []
    seen: list[InstanceSpec] = []
    for r in results:
        if r.spec not in seen:
            seen.append(r.spec)
    for spec in seen:
        group = [r for r in results if r.spec == spec]
        wins = [r for r in group if r.success]
        errors = [r.final_error for r in wins if r.final_error is not None]
        rows.append(
            AggregateRow(
                spec=spec,
                trials=len(group),
                success_rate=len(wins) / len(group),
                mean_time_s=float(np.mean([r.wall_time_seconds for r in wins])) if wins else None,
                mean_iters=float(np.mean([r.outer_iters for r in wins])) if wins else None,
                mean_error=float(np.mean(errors)) if errors else None,
                total_time_s=float(np.sum([r.wall_time_seconds for r in group])),
            )
        )
    return rows


def aggregate_table(rows: list[AggregateRow]) -> str:
    header = f"{'problem':<10} {'dims':<10} {'noise':<7} {'success':<8} {'time[s]':<10} {'iter':<7} {'error':<10} {'total[s]':<9}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row.spec.problem:<10} {row.spec.dims_label():<10} {row.spec.noise:<7g} "
            f"{row.success_rate:<8.2f} "
            f"{row.mean_time_s if row.mean_time_s is not None else float('nan'):<10.3f} "
            f"{row.mean_iters if row.mean_iters is not None else float('nan'):<7.1f} "
            f"{row.mean_error if row.mean_error is not None else float('nan'):<10.2e} "
            f"{row.total_time_s:<9.2f}"
        )
    return "\n".join(lines)


def builtin_suite(name: str, seed: int = 0) -> list[InstanceSpec]:
    """Named suites mirroring the benchmark tables at their stated budgets."""
    if name == "paper1":
        return [
            InstanceSpec(NLRM, dims, noise=noise, seed=seed, tol_kkt=1e-8, t_max_seconds=180.0)
            for dims in ((20, 16, 2), (30, 24, 3), (40, 32, 4))
            for noise in ALLOWED_NOISE
        ]
    if name == "paper2-st":
        return [
            InstanceSpec(MODEL_ST, dims, seed=seed, tol_kkt=1e-6, t_max_seconds=600.0)
            for dims in ((40, 8), (50, 10), (60, 12), (70, 14))
        ]
    if name == "paper2-ob":
        return [
            InstanceSpec(MODEL_OB, dims, seed=seed, tol_kkt=1e-6, t_max_seconds=600.0)
            for dims in ((40, 8), (50, 10), (60, 12), (70, 14))
        ]
    raise ValueError(f"unknown suite {name!r}")
