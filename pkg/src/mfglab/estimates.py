"""A priori bound bookkeeping for solved states.

Each report gathers the integral quantities whose uniform-in-sigma control
drives the compactness argument behind the continuation: entropy, kinetic
energy, barrier mass, smoothing norms (first order); Hessian energy, Fisher
information, and their barrier/smoothing companions (second order).  The
helpers at the bottom turn per-stage sequences of those quantities into
verdicts: a log-log rate fit, a strict-decrease check, and a factor-of-ten
uniformity check against the coarsest stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigurationError, DomainError, ParameterError
from .solver import RegularizationParams, beta_sigma, beta_sigma_prime
from .torus import (
    PeriodicField,
    gradient,
    integrate,
    integrate_values,
    l2_norm,
    laplacian_power,
)

__all__ = [
    "FirstOrderReport",
    "first_order_report",
    "SecondOrderReport",
    "second_order_report",
    "mass_identity_residual",
    "EntropyBoundReport",
    "entropy_bound_constant",
    "entropy_bound_check",
    "RateFit",
    "convergence_rate_fit",
    "monotone_decrease",
    "UniformityReport",
    "uniformity_check",
    "InequalityAuditReport",
    "sqrt_log_inequality_audit",
]


def _check_pair(density: PeriodicField, value: PeriodicField) -> None:
    if density.grid != value.grid:
        raise ConfigurationError("density and value live on different grids")
    if density.min_value() <= 0.0:
        raise DomainError("estimates require a strictly positive density")


def _smoothing_norm_sq(field: PeriodicField, order: int) -> float:
    return l2_norm(field) ** 2 + l2_norm(laplacian_power(field, order)) ** 2


# ---------------------------------------------------------------------------
# first-order quantities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FirstOrderReport:
    """Integral quantities controlled uniformly along the continuation."""

    entropy: float  # int m log m
    log_mean: float  # int log m
    mass: float  # int m
    kinetic: float  # int (m + 1) |grad u|^2 / 2
    barrier_mass: float  # int -beta(m)  (nonnegative)
    barrier_pairing: float  # int beta(m) (m - sigma)  (nonnegative)
    smoothing: float  # sigma * (||u||^2 + ||lap^k u||^2 + ||m||^2 + ||lap^k m||^2)


def first_order_report(
    density: PeriodicField,
    value: PeriodicField,
    params: RegularizationParams,
) -> FirstOrderReport:
    _check_pair(density, value)
    params.validate_for_grid(density.grid)
    grid = density.grid
    m = density.values
    sigma, q, order = params.sigma, params.penalty_exponent, params.smoothing_order

    log_m = np.log(m)
    du = gradient(value).values
    barrier = beta_sigma(m, sigma, q)
    smoothing = sigma * (
        _smoothing_norm_sq(value, order) + _smoothing_norm_sq(density, order)
    )
    return FirstOrderReport(
        entropy=integrate_values(grid, m * log_m),
        log_mean=integrate_values(grid, log_m),
        mass=integrate(density),
        kinetic=integrate_values(grid, 0.5 * (m + 1.0) * np.sum(du * du, axis=0)),
        barrier_mass=integrate_values(grid, -barrier),
        barrier_pairing=integrate_values(grid, barrier * (m - sigma)),
        smoothing=smoothing,
    )


# ---------------------------------------------------------------------------
# second-order quantities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SecondOrderReport:
    hessian_energy: float  # int m |hess u|_F^2
    fisher: float  # int |grad m|^2 / (2 m)
    barrier_gradient: float  # int beta'(m) |grad m|^2
    smoothing_gradient: float  # sigma * sum over first derivatives of both fields
    diffusion_slope_ok: Optional[bool]  # sup |grad a| < 1, None without a coefficient


def second_order_report(
    density: PeriodicField,
    value: PeriodicField,
    params: RegularizationParams,
    diffusion: Optional[PeriodicField] = None,
) -> SecondOrderReport:
    _check_pair(density, value)
    params.validate_for_grid(density.grid)
    grid = density.grid
    d = grid.d
    m = density.values
    sigma, q, order = params.sigma, params.penalty_exponent, params.smoothing_order

    du_field = gradient(value)
    dm_field = gradient(density)
    du = du_field.values
    dm = dm_field.values

    frobenius = np.zeros(grid.shape)
    for i in range(d):
        row = gradient(PeriodicField(grid, du[i])).values
        for j in range(d):
            frobenius += row[j] ** 2

    grad_sq_m = np.sum(dm * dm, axis=0)
    smoothing_gradient = 0.0
    for component_stack in (du, dm):
        for j in range(d):
            comp = PeriodicField(grid, component_stack[j])
            smoothing_gradient += _smoothing_norm_sq(comp, order)
    smoothing_gradient *= sigma

    slope_ok: Optional[bool] = None
    if diffusion is not None:
        if diffusion.grid != grid:
            raise ConfigurationError("diffusion lives on a different grid")
        da = gradient(diffusion).values
        slope_ok = bool(np.max(np.sqrt(np.sum(da * da, axis=0))) < 1.0)

    return SecondOrderReport(
        hessian_energy=integrate_values(grid, m * frobenius),
        fisher=integrate_values(grid, 0.5 * grad_sq_m / m),
        barrier_gradient=integrate_values(
            grid, beta_sigma_prime(m, sigma, q) * grad_sq_m
        ),
        smoothing_gradient=smoothing_gradient,
        diffusion_slope_ok=slope_ok,
    )


def mass_identity_residual(
    density: PeriodicField, value: PeriodicField, sigma: float
) -> float:
    """Signed defect of ``int m + sigma int u - 1``, which the smoothed
    system conserves exactly."""
    if density.grid != value.grid:
        raise ConfigurationError("density and value live on different grids")
    if not (math.isfinite(sigma) and sigma >= 0.0):
        raise ParameterError(f"sigma must be finite and >= 0, got {sigma}")
    return integrate(density) + sigma * integrate(value) - 1.0


# ---------------------------------------------------------------------------
# entropy lower bound
# ---------------------------------------------------------------------------


def entropy_bound_constant(
    delta: float, extra_candidates: Optional[np.ndarray] = None
) -> float:
    """Numerical sup of ``s - delta * s * log(s)`` over s > 0.

    Scans a wide log grid, polishes the best bracket with Brent, and folds in
    any caller-supplied candidate points so the resulting constant dominates
    the objective at those points exactly.
    """
    if not (math.isfinite(delta) and delta > 0.0):
        raise ParameterError(f"delta must be positive, got {delta}")

    def objective(s: np.ndarray) -> np.ndarray:
        return s - delta * s * np.log(s)

    grid = np.logspace(-8.0, 8.0, 2001)
    vals = objective(grid)
    best = int(np.argmax(vals))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, len(grid) - 1)]
    result = minimize_scalar(
        lambda t: -float(objective(np.exp(np.array(t)))),
        bounds=(math.log(lo), math.log(hi)),
        method="bounded",
        options={"xatol": 1e-14},
    )
    constant = max(float(vals[best]), -float(result.fun))
    if extra_candidates is not None:
        arr = np.asarray(extra_candidates, dtype=np.float64)
        if np.min(arr) <= 0.0:
            raise DomainError("candidate points must be strictly positive")
        constant = max(constant, float(np.max(objective(arr))))
    return constant


@dataclass(frozen=True)
class EntropyBoundReport:
    delta: float
    constant: float
    mass: float
    bound: float
    slack: float
    satisfied: bool


def entropy_bound_check(density: PeriodicField, delta: float) -> EntropyBoundReport:
    """Check ``int m <= delta * int m log m + C(delta)`` with the constant
    derived numerically (the density's own node values are candidate points,
    so the pointwise bound transfers to the quadrature exactly)."""
    if density.min_value() <= 0.0:
        raise DomainError("entropy bound requires a strictly positive density")
    constant = entropy_bound_constant(delta, extra_candidates=density.values)
    mass = integrate(density)
    entropy = integrate_values(density.grid, density.values * np.log(density.values))
    bound = delta * entropy + constant
    slack = bound - mass
    return EntropyBoundReport(
        delta=delta,
        constant=constant,
        mass=mass,
        bound=bound,
        slack=slack,
        satisfied=slack >= -1e-12,
    )


# ---------------------------------------------------------------------------
# per-stage sequence verdicts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    stages: int
    degenerate: bool  # some stage error sits at the roundoff floor


def convergence_rate_fit(
    sigmas: Sequence[float],
    errors: Sequence[float],
    *,
    floor: float = 1e-15,
) -> RateFit:
    """Least-squares slope of log(error) against log(sigma).

    Requires at least three stages on a strictly decreasing positive
    schedule.  Stages whose error has collapsed to the roundoff floor mark
    the fit ``degenerate``; the slope is still reported (with the floor
    substituted) so callers can show it.
    """
    s = tuple(float(x) for x in sigmas)
    e = tuple(float(x) for x in errors)
    if len(s) != len(e):
        raise ConfigurationError("sigmas and errors must have equal length")
    if len(s) < 3:
        raise ConfigurationError("rate fit needs at least three stages")
    if any(not (math.isfinite(x) and x > 0.0) for x in s):
        raise ConfigurationError("schedule entries must be finite and positive")
    if any(b >= a for a, b in zip(s, s[1:])):
        raise ConfigurationError("schedule must be strictly decreasing")
    if any(not math.isfinite(x) or x < 0.0 for x in e):
        raise ConfigurationError("errors must be finite and nonnegative")

    degenerate = min(e) <= floor
    clipped = np.maximum(np.asarray(e), floor)
    slope, intercept = np.polyfit(np.log(np.asarray(s)), np.log(clipped), 1)
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        stages=len(s),
        degenerate=degenerate,
    )


def monotone_decrease(values: Sequence[float], *, strict: bool = True) -> bool:
    """Whether the sequence decreases along the continuation (first entry is
    the coarsest stage)."""
    vals = tuple(float(v) for v in values)
    if len(vals) < 2:
        raise ConfigurationError("monotonicity needs at least two stages")
    if strict:
        return all(b < a for a, b in zip(vals, vals[1:]))
    return all(b <= a for a, b in zip(vals, vals[1:]))


@dataclass(frozen=True)
class UniformityReport:
    reference: float
    bound: float
    max_abs: float
    passed: bool


def uniformity_check(
    values: Sequence[float], *, factor: float = 10.0
) -> UniformityReport:
    """All stage values must stay within ``factor`` of the coarsest stage
    (plus one absolute unit, so near-zero baselines are not penalized)."""
    vals = tuple(float(v) for v in values)
    if len(vals) == 0:
        raise ConfigurationError("uniformity check needs at least one stage")
    if factor <= 1.0:
        raise ParameterError(f"factor must exceed 1, got {factor}")
    reference = abs(vals[0])
    bound = factor * reference + 1.0
    max_abs = max(abs(v) for v in vals)
    return UniformityReport(
        reference=reference,
        bound=bound,
        max_abs=max_abs,
        passed=max_abs <= bound,
    )


# ---------------------------------------------------------------------------
# the elementary logarithmic-square-root inequality
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InequalityAuditReport:
    samples: int
    min_gap: float
    worst_pair: Tuple[float, float]
    passed: bool


def sqrt_log_inequality_audit(
    *,
    per_axis: int = 100,
    low: float = 1e-3,
    high: float = 1e3,
    threshold: float = -1e-12,
) -> InequalityAuditReport:
    """Sweep ``(a - b)(log a - log b) >= 4 (sqrt a - sqrt b)^2`` over a log
    grid of pairs; the gap may only go negative by roundoff."""
    if not (0.0 < low < high):
        raise ParameterError("need 0 < low < high")
    if per_axis < 2:
        raise ParameterError("need at least two points per axis")
    s = np.logspace(math.log10(low), math.log10(high), per_axis)
    a, b = np.meshgrid(s, s, indexing="ij")
    gap = (a - b) * (np.log(a) - np.log(b)) - 4.0 * (np.sqrt(a) - np.sqrt(b)) ** 2
    worst = np.unravel_index(int(np.argmin(gap)), gap.shape)
    min_gap = float(gap[worst])
    return InequalityAuditReport(
        samples=per_axis * per_axis,
        min_gap=min_gap,
        worst_pair=(float(a[worst]), float(b[worst])),
        passed=min_gap >= threshold,
    )
