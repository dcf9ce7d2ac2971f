"""Experiment drivers: the smoothing sweep and the uniqueness corroboration.

``run_experiment`` walks the configured smoothing schedule with warm starts,
collects the a priori quantities per stage, measures convergence toward the
finest stage, and fits log-log rates.  ``emit_report`` writes the delimited
table, a JSON summary, a rendered convergence figure, and the final fields in
the binary format.  ``uniqueness_experiment`` reruns the continuation from
different initial guesses along different schedules ending at the same
smoothing weight and checks that all paths land on the same state, then
corroborates the limit against the weak inequality battery.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .config import ExperimentConfig, build_problem, config_digest
from .errors import ConfigurationError
from .estimates import (
    EntropyBoundReport,
    RateFit,
    UniformityReport,
    convergence_rate_fit,
    entropy_bound_check,
    first_order_report,
    monotone_decrease,
    uniformity_check,
)
from .fieldio import write_fields, write_table
from .models import QuadraticLogHamiltonian
from .operators import FieldPair, make_test_battery, weak_inequality_check
from .solver import (
    RegularizationParams,
    SolverReport,
    StationaryProblem,
    sigma_continuation,
)
from .torus import PeriodicField, h1_norm, integrate_values

__all__ = [
    "RunRecord",
    "SweepRow",
    "SweepResult",
    "run_experiment",
    "emit_report",
    "UniquenessReport",
    "uniqueness_experiment",
]

CSV_HEADER = (
    "sigma",
    "iterations",
    "residual",
    "mass_residual",
    "entropy",
    "kinetic",
    "smoothing",
    "u_h1_norm",
    "sqrt_m_err_sq",
    "u_h1_err",
)

_ENTROPY_DELTAS = (1.0, 0.5, 0.25)
_UNIFORMITY_QUANTITIES = ("entropy", "kinetic", "smoothing", "u_h1_norm")


@dataclass(frozen=True)
class RunRecord:
    """Identity of a run: the config digest plus its headline shape.

    Deliberately carries no timestamps, so identical configs produce
    identical records.
    """

    digest: str
    dimension: int
    points: int
    schedule: Tuple[float, ...]
    seed: int


@dataclass(frozen=True)
class SweepRow:
    sigma: float
    iterations: int
    residual: float
    mass_residual: float
    entropy: float
    kinetic: float
    smoothing: float
    u_h1_norm: float
    sqrt_m_err_sq: float  # int (sqrt(m) - sqrt(m_finest))^2
    u_h1_err: float  # W^{1,2} distance of u to the finest stage

    def as_cells(self) -> Tuple:
        return (
            self.sigma,
            self.iterations,
            self.residual,
            self.mass_residual,
            self.entropy,
            self.kinetic,
            self.smoothing,
            self.u_h1_norm,
            self.sqrt_m_err_sq,
            self.u_h1_err,
        )


@dataclass(frozen=True)
class SweepResult:
    record: RunRecord
    rows: Tuple[SweepRow, ...]
    success: bool
    failure_message: str
    rate_sqrt_m: Optional[RateFit]
    rate_u: Optional[RateFit]
    u_norm_strictly_decreasing: Optional[bool]
    uniformity: Tuple[Tuple[str, UniformityReport], ...]
    entropy_checks: Tuple[EntropyBoundReport, ...]
    final_density: Optional[PeriodicField] = field(repr=False, default=None)
    final_value: Optional[PeriodicField] = field(repr=False, default=None)


def _stage_params(config: ExperimentConfig, sigma: float) -> RegularizationParams:
    order = config.smoothing_order
    if order is None:
        order = 3 if config.dimension == 1 else 4
    q = config.penalty_exponent
    if q is None:
        q = float(config.dimension + 1)
    return RegularizationParams(sigma, order, q)


def _build_rows(
    config: ExperimentConfig, reports: Sequence[SolverReport]
) -> Tuple[SweepRow, ...]:
    converged = [r for r in reports if r.converged]
    if not converged:
        return ()
    reference = converged[-1]
    sqrt_ref = np.sqrt(reference.density.values)
    rows = []
    for rep in converged:
        params = _stage_params(config, rep.sigma)
        first = first_order_report(rep.density, rep.value, params)
        diff_value = PeriodicField(
            rep.value.grid, rep.value.values - reference.value.values
        )
        sqrt_err = integrate_values(
            rep.density.grid, (np.sqrt(rep.density.values) - sqrt_ref) ** 2
        )
        rows.append(
            SweepRow(
                sigma=rep.sigma,
                iterations=rep.iterations,
                residual=rep.residual_history[-1],
                mass_residual=rep.mass_residual,
                entropy=first.entropy,
                kinetic=first.kinetic,
                smoothing=first.smoothing,
                u_h1_norm=h1_norm(rep.value),
                sqrt_m_err_sq=sqrt_err,
                u_h1_err=h1_norm(diff_value),
            )
        )
    return tuple(rows)


def run_experiment(config: ExperimentConfig) -> SweepResult:
    problem = build_problem(config)
    params0 = _stage_params(config, config.schedule[0] if config.schedule else 1.0)
    result = sigma_continuation(
        problem,
        config.schedule,
        smoothing_order=params0.smoothing_order,
        penalty_exponent=params0.penalty_exponent,
        tol=config.tol,
        max_iter=config.max_iter,
        linear_solver=config.linear_solver,
    )
    record = RunRecord(
        digest=config_digest(config),
        dimension=config.dimension,
        points=config.points,
        schedule=config.schedule,
        seed=config.seed,
    )
    rows = _build_rows(config, result.reports)
    failure_message = ""
    if not result.success:
        bad = result.reports[-1]
        failure_message = (
            f"stage sigma={bad.sigma:g} failed after {bad.iterations} step(s): "
            f"{bad.message}"
        )

    rate_sqrt_m = rate_u = None
    if result.success and len(rows) >= 4:
        head = rows[:-1]  # the finest stage is the reference; its error is zero
        sigmas = [r.sigma for r in head]
        rate_sqrt_m = convergence_rate_fit(sigmas, [r.sqrt_m_err_sq for r in head])
        rate_u = convergence_rate_fit(sigmas, [r.u_h1_err for r in head])

    decreasing = None
    if len(rows) >= 2:
        decreasing = monotone_decrease([r.u_h1_norm for r in rows])

    uniformity = tuple(
        (name, uniformity_check([getattr(r, name) for r in rows]))
        for name in _UNIFORMITY_QUANTITIES
    ) if rows else ()

    entropy_checks: Tuple[EntropyBoundReport, ...] = ()
    final_density = final_value = None
    if rows:
        last = [r for r in result.reports if r.converged][-1]
        final_density, final_value = last.density, last.value
        entropy_checks = tuple(
            entropy_bound_check(final_density, delta) for delta in _ENTROPY_DELTAS
        )

    return SweepResult(
        record=record,
        rows=rows,
        success=result.success,
        failure_message=failure_message,
        rate_sqrt_m=rate_sqrt_m,
        rate_u=rate_u,
        u_norm_strictly_decreasing=decreasing,
        uniformity=uniformity,
        entropy_checks=entropy_checks,
        final_density=final_density,
        final_value=final_value,
    )


def _result_payload(result: SweepResult) -> Dict:
    return {
        "record": asdict(result.record),
        "success": result.success,
        "failure_message": result.failure_message,
        "rows": [asdict(r) for r in result.rows],
        "rate_sqrt_m": asdict(result.rate_sqrt_m) if result.rate_sqrt_m else None,
        "rate_u": asdict(result.rate_u) if result.rate_u else None,
        "u_norm_strictly_decreasing": result.u_norm_strictly_decreasing,
        "uniformity": {name: asdict(rep) for name, rep in result.uniformity},
        "entropy_checks": [asdict(rep) for rep in result.entropy_checks],
    }


def _render_convergence_figure(result: SweepResult, path: Path) -> None:
    head = result.rows[:-1] if len(result.rows) > 1 else result.rows
    sigmas = np.array([r.sigma for r in head], dtype=np.float64)
    floor = 1e-18
    sqrt_err = np.maximum([r.sqrt_m_err_sq for r in head], floor)
    u_err = np.maximum([r.u_h1_err for r in head], floor)

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    label_m = "density root-difference (squared)"
    label_u = "value W12 distance"
    if result.rate_sqrt_m is not None:
        label_m += f" [slope {result.rate_sqrt_m.slope:.3f}]"
    if result.rate_u is not None:
        label_u += f" [slope {result.rate_u.slope:.3f}]"
    ax.loglog(sigmas, sqrt_err, "o-", label=label_m)
    ax.loglog(sigmas, u_err, "s--", label=label_u)
    ax.set_xlabel("smoothing weight")
    ax.set_ylabel("distance to finest stage")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def emit_report(
    result: SweepResult,
    out_dir: Union[str, Path],
    formats: Sequence[str] = ("csv", "json", "svg"),
) -> Dict[str, Path]:
    """Write the sweep outputs; returns the paths keyed by kind."""
    allowed = {"csv", "json", "svg"}
    unknown = sorted(set(formats) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown report formats: {', '.join(unknown)}")
    if not formats:
        raise ConfigurationError("at least one report format is required")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: Dict[str, Path] = {}

    if "csv" in formats:
        path = out / "sweep.csv"
        write_table(path, CSV_HEADER, [r.as_cells() for r in result.rows])
        written["csv"] = path
    if "json" in formats:
        import json

        path = out / "sweep.json"
        path.write_text(json.dumps(_result_payload(result), indent=2, sort_keys=True))
        written["json"] = path
    if "svg" in formats and result.rows:
        path = out / "convergence.svg"
        _render_convergence_figure(result, path)
        written["svg"] = path
    if result.final_density is not None and result.final_value is not None:
        path = out / "fields.bin"
        write_fields(
            path,
            result.final_density.grid,
            [result.final_density.values, result.final_value.values],
        )
        written["fields"] = path
    return written


# ---------------------------------------------------------------------------
# uniqueness corroboration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniquenessReport:
    runs: int
    stage_counts: Tuple[int, ...]
    pairwise_density_sup: float
    pairwise_value_sup: float
    weak_minimum: float
    converged: bool
    passed: bool


def _refined_schedule(schedule: Tuple[float, ...]) -> Tuple[float, ...]:
    """A strictly finer path to the same endpoint: geometric midpoints."""
    if len(schedule) == 1:
        return (2.0 * schedule[0], schedule[0])
    out = []
    for a, b in zip(schedule, schedule[1:]):
        out.append(a)
        out.append(math.sqrt(a * b))
    out.append(schedule[-1])
    return tuple(out)


def _perturbed_start(
    problem: StationaryProblem, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    """A deterministic positive-density state away from the flat start."""
    grid = problem.grid
    rng = np.random.default_rng(seed)
    from .operators import _band_limited

    bump_m = _band_limited(grid, rng, max_mode=2, scale=0.1)
    bump_u = _band_limited(grid, rng, max_mode=2, scale=0.1)
    # rescale so the density stays safely positive for any draw
    peak = float(np.max(np.abs(bump_m)))
    if peak > 0.5:
        bump_m = bump_m * (0.5 / peak)
    m = 1.0 + bump_m
    return np.fft.fftn(m), np.fft.fftn(bump_u)


def uniqueness_experiment(
    config: ExperimentConfig,
    *,
    pair_tol: float = 1e-6,
    weak_threshold: float = 1e-4,
    battery_count: int = 50,
) -> UniquenessReport:
    """Continuation from two starts along two schedules to one endpoint.

    All four runs must converge and agree pairwise in sup norm; the common
    limit is then tested against the weak inequality battery.  Only the
    logarithmic-coupling system is covered: the congestion family's coupling
    is not monotone in the required sense, so no uniqueness claim is made
    for it.
    """
    if config.model.family != "quadratic_log":
        raise ConfigurationError(
            f"uniqueness experiment covers only the quadratic_log family, "
            f"not {config.model.family!r}"
        )
    problem = build_problem(config)
    params0 = _stage_params(config, config.schedule[0] if config.schedule else 1.0)

    schedules = (config.schedule, _refined_schedule(config.schedule))
    starts = (None, _perturbed_start(problem, config.seed + 1))

    finals = []
    stage_counts = []
    converged = True
    for schedule, start in itertools.product(schedules, starts):
        outcome = sigma_continuation(
            problem,
            schedule,
            smoothing_order=params0.smoothing_order,
            penalty_exponent=params0.penalty_exponent,
            tol=config.tol,
            max_iter=config.max_iter,
            linear_solver=config.linear_solver,
            initial=start,
        )
        stage_counts.append(len(outcome.reports))
        if not outcome.success:
            converged = False
            continue
        finals.append(outcome.final)

    pair_density = pair_value = math.inf
    weak_min = -math.inf
    passed = False
    if converged and len(finals) >= 2:
        pair_density = max(
            float(np.max(np.abs(a.density.values - b.density.values)))
            for a, b in itertools.combinations(finals, 2)
        )
        pair_value = max(
            float(np.max(np.abs(a.value.values - b.value.values)))
            for a, b in itertools.combinations(finals, 2)
        )
        model = QuadraticLogHamiltonian.from_coefficients(
            problem.diffusion, problem.drift, problem.potential
        )
        candidate = FieldPair(finals[0].density, finals[0].value)
        battery = make_test_battery(
            problem.grid, count=battery_count, seed=config.seed
        )
        weak = weak_inequality_check(
            model, problem.diffusion, candidate, battery, threshold=weak_threshold
        )
        weak_min = weak.min_value
        passed = (
            pair_density <= pair_tol and pair_value <= pair_tol and weak.passed
        )

    return UniquenessReport(
        runs=len(schedules) * len(starts),
        stage_counts=tuple(stage_counts),
        pairwise_density_sup=pair_density,
        pairwise_value_sup=pair_value,
        weak_minimum=weak_min,
        converged=converged,
        passed=passed,
    )
