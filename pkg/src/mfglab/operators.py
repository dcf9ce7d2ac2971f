"""Coupled-system operators, duality pairings, and monotonicity audits.

States are density/value pairs on a shared torus grid.  The stationary
operator maps a pair to the two equation residuals:

* value equation: ``-v + a * lap(v) - H(x, grad v, density)``
* density equation: ``(density - 1) - lap(a * density) - div(density * H_p)``

The returned pair stores the value-equation residual in the *density* slot
and the density-equation residual in the *value* slot: with that crosswise
arrangement the plain componentwise duality pairing realizes the monotone
structure, i.e. ``duality_pairing(apply_A(w1) - apply_A(w2), w1 - w2) >= 0``
for monotone models.

The time-dependent variant replaces the zeroth-order anchors by second-order
time derivatives (centered in the interior, one-sided at the two ends), and
pairs are integrated with the trapezoid rule in time.

All spatial derivatives here go through the shared gradient/divergence
multiplier tables, so every integration-by-parts step used by the audits is
exact in floating point up to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as _iter_product
from typing import Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, ParameterError
from .mollify import adapted_mollify, spatial_mollify
from .torus import (
    Grid,
    PeriodicField,
    SpaceTimeField,
    VectorField,
    gradient,
    divergence,
    integrate_values,
    nodes,
)
from .models import Hamiltonian, QuadraticLogHamiltonian

__all__ = [
    "FieldPair",
    "SpaceTimePair",
    "pair_difference",
    "apply_A",
    "apply_B",
    "time_derivative",
    "duality_pairing",
    "duality_pairing_spacetime",
    "monotonicity_gap",
    "WeakInequalityReport",
    "weak_inequality_check",
    "make_test_battery",
    "cancellation_residual",
]


@dataclass(frozen=True)
class FieldPair:
    """A density/value state (or direction) on one grid."""

    density: PeriodicField
    value: PeriodicField

    def __post_init__(self) -> None:
        if self.density.grid != self.value.grid:
            raise ConfigurationError("pair components live on different grids")

    @property
    def grid(self) -> Grid:
        return self.density.grid


@dataclass(frozen=True)
class SpaceTimePair:
    """A density/value trajectory on one grid and one time ladder."""

    density: SpaceTimeField
    value: SpaceTimeField

    def __post_init__(self) -> None:
        if self.density.grid != self.value.grid:
            raise ConfigurationError("pair components live on different grids")
        if not np.array_equal(self.density.times, self.value.times):
            raise ConfigurationError("pair components live on different time ladders")

    @property
    def grid(self) -> Grid:
        return self.density.grid

    @property
    def times(self) -> np.ndarray:
        return self.density.times

    def slice(self, i: int) -> FieldPair:
        return FieldPair(self.density.slice(i), self.value.slice(i))


def pair_difference(a: FieldPair, b: FieldPair) -> FieldPair:
    if a.grid != b.grid:
        raise ConfigurationError("pairs live on different grids")
    return FieldPair(
        PeriodicField(a.grid, a.density.values - b.density.values),
        PeriodicField(a.grid, a.value.values - b.value.values),
    )


def _check_model_grid(model: Hamiltonian, grid: Grid) -> None:
    if isinstance(model, QuadraticLogHamiltonian) and model.grid != grid:
        raise ConfigurationError("model coefficients live on a different grid")


def _laplacian(f: PeriodicField) -> PeriodicField:
    # composed from the shared first-order tables so adjointness is exact
    return divergence(gradient(f))


def _stationary_rows(
    model: Hamiltonian, diffusion: PeriodicField, pair: FieldPair
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Common core: returns (value_eq_without_anchor, density_eq_without_anchor,
    value field values); the anchors differ between the stationary and
    time-dependent operators."""
    grid = pair.grid
    dv = gradient(pair.value)
    vals = model.evaluate(dv.values, pair.density.values)
    lap_v = _laplacian(pair.value)
    value_eq = diffusion.values * lap_v.values - vals.value
    a_eta = PeriodicField(grid, diffusion.values * pair.density.values)
    flux = VectorField(grid, pair.density.values * vals.grad_p)
    density_eq = -_laplacian(a_eta).values - divergence(flux).values
    return value_eq, density_eq, pair.value.values


def apply_A(model: Hamiltonian, diffusion: PeriodicField, pair: FieldPair) -> FieldPair:
    """Stationary operator; see the module docstring for the slot convention."""
    if diffusion.grid != pair.grid:
        raise ConfigurationError("diffusion coefficient lives on a different grid")
    _check_model_grid(model, pair.grid)
    value_eq, density_eq, v_values = _stationary_rows(model, diffusion, pair)
    grid = pair.grid
    return FieldPair(
        PeriodicField(grid, -v_values + value_eq),
        PeriodicField(grid, (pair.density.values - 1.0) + density_eq),
    )


def time_derivative(f: SpaceTimeField) -> SpaceTimeField:
    """Second-order time derivative: centered inside, one-sided at the ends."""
    nt = f.values.shape[0]
    if nt < 3:
        raise ConfigurationError("time derivative needs at least three time nodes")
    dt = f.dt
    out = np.empty_like(f.values)
    out[1:-1] = (f.values[2:] - f.values[:-2]) / (2.0 * dt)
    out[0] = (-3.0 * f.values[0] + 4.0 * f.values[1] - f.values[2]) / (2.0 * dt)
    out[-1] = (3.0 * f.values[-1] - 4.0 * f.values[-2] + f.values[-3]) / (2.0 * dt)
    return SpaceTimeField(f.grid, f.times, out)


def apply_B(
    model: Hamiltonian, diffusion: PeriodicField, pair: SpaceTimePair
) -> SpaceTimePair:
    """Time-dependent operator: zeroth-order anchors become time derivatives."""
    if diffusion.grid != pair.grid:
        raise ConfigurationError("diffusion coefficient lives on a different grid")
    _check_model_grid(model, pair.grid)
    v_t = time_derivative(pair.value)
    eta_t = time_derivative(pair.density)
    nt = pair.times.shape[0]
    rows_value_slot = np.empty_like(pair.density.values)
    rows_density_slot = np.empty_like(pair.density.values)
    for i in range(nt):
        value_eq, density_eq, _ = _stationary_rows(model, diffusion, pair.slice(i))
        rows_value_slot[i] = v_t.values[i] + value_eq
        rows_density_slot[i] = eta_t.values[i] + density_eq
    return SpaceTimePair(
        SpaceTimeField(pair.grid, pair.times, rows_value_slot),
        SpaceTimeField(pair.grid, pair.times, rows_density_slot),
    )


def duality_pairing(a: FieldPair, b: FieldPair) -> float:
    """Componentwise pairing ``int(a_density*b_density + a_value*b_value)``."""
    if a.grid != b.grid:
        raise ConfigurationError("pairs live on different grids")
    return integrate_values(
        a.grid,
        a.density.values * b.density.values + a.value.values * b.value.values,
    )


def duality_pairing_spacetime(a: SpaceTimePair, b: SpaceTimePair) -> float:
    """Trapezoid-in-time integral of the slicewise pairing."""
    if a.grid != b.grid:
        raise ConfigurationError("pairs live on different grids")
    if not np.array_equal(a.times, b.times):
        raise ConfigurationError("pairs live on different time ladders")
    nt = a.times.shape[0]
    if nt < 2:
        raise ConfigurationError("space-time pairing needs at least two time nodes")
    slicewise = [duality_pairing(a.slice(i), b.slice(i)) for i in range(nt)]
    weights = np.full(nt, a.density.dt)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    return float(np.dot(weights, slicewise))


def monotonicity_gap(
    model: Hamiltonian, diffusion: PeriodicField, w1: FieldPair, w2: FieldPair
) -> float:
    """``<A(w1) - A(w2), w1 - w2>`` — nonnegative for monotone models."""
    image_diff = pair_difference(
        apply_A(model, diffusion, w1), apply_A(model, diffusion, w2)
    )
    return duality_pairing(image_diff, pair_difference(w1, w2))


# ---------------------------------------------------------------------------
# weak-solution inequality battery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeakInequalityReport:
    """Minty-form audit: the operator is evaluated at the test states."""

    threshold: float
    values: Tuple[float, ...]
    min_value: float
    worst_index: int

    @property
    def passed(self) -> bool:
        return self.min_value >= -self.threshold


def weak_inequality_check(
    model: Hamiltonian,
    diffusion: PeriodicField,
    candidate: FieldPair,
    battery: Sequence[FieldPair],
    threshold: float = 1e-4,
) -> WeakInequalityReport:
    """Evaluate ``<t - candidate, A(t)>`` over the battery of test states.

    For a true solution monotonicity makes every value nonnegative; a
    substantially negative minimum certifies that the candidate is not a
    solution.  The operator is applied to the test states only, so the
    candidate itself never needs to be in the model's classical domain.
    """
    if threshold <= 0.0:
        raise ParameterError(f"threshold must be positive, got {threshold}")
    if len(battery) == 0:
        raise ConfigurationError("battery must contain at least one test state")
    values = []
    for test in battery:
        image = apply_A(model, diffusion, test)
        values.append(duality_pairing(pair_difference(test, candidate), image))
    worst = int(np.argmin(values))
    return WeakInequalityReport(
        threshold=float(threshold),
        values=tuple(float(v) for v in values),
        min_value=float(values[worst]),
        worst_index=worst,
    )


def _battery_modes(d: int, max_mode: int):
    """One representative frequency per +/- pair, zero excluded."""
    modes = []
    ranges = [range(-max_mode, max_mode + 1)] * d
    for k in _iter_product(*ranges):
        if all(c == 0 for c in k):
            continue
        nonzero = next(c for c in k if c != 0)
        if nonzero < 0:
            continue
        modes.append(k)
    return modes


def _band_limited(grid: Grid, rng: np.random.Generator, max_mode: int, scale: float):
    xs = nodes(grid)
    values = np.zeros(grid.shape)
    modes = _battery_modes(grid.d, max_mode)
    for k in modes:
        phase = 2.0 * np.pi * sum(ki * xi for ki, xi in zip(k, xs))
        values += rng.normal(0.0, scale) * np.cos(phase)
        values += rng.normal(0.0, scale) * np.sin(phase)
    return values


def make_test_battery(
    grid: Grid, count: int = 50, seed: int = 0
) -> Tuple[FieldPair, ...]:
    """Seeded battery of smooth positive-density test states.

    Densities are unit-mass band-limited perturbations of one, floored away
    from zero; values combine a constant with a smaller band-limited part, so
    the battery probes both mass mismatches and oscillatory directions.
    """
    if count < 1:
        raise ParameterError(f"battery count must be positive, got {count}")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        density = 1.0 + _band_limited(grid, rng, max_mode=3, scale=0.1)
        density = np.maximum(density, 0.2)
        density /= integrate_values(grid, density)
        value = rng.normal(0.0, 0.5) + _band_limited(grid, rng, max_mode=2, scale=0.05)
        out.append(
            FieldPair(
                PeriodicField(grid, density, is_density=True),
                PeriodicField(grid, value),
            )
        )
    return tuple(out)


# ---------------------------------------------------------------------------
# commutator cancellation
# ---------------------------------------------------------------------------


def cancellation_residual(
    diffusion: PeriodicField,
    density_diff: PeriodicField,
    value_diff: PeriodicField,
    width: float,
) -> float:
    """Relative size of the cross-term identity defect.

    Smoothing the density difference with the coefficient-adapted mollifier
    and the value difference with the plain double-pass mollifier makes

    ``int(density_diff * a * lap(v_s)) + int(grad(value_diff) . grad(a * eta_s))``

    vanish identically; discretely the two terms cancel to roundoff because
    both reduce to the same multiplier sum.  Returns
    ``|sum| / (|term1| + |term2|)`` (zero when both terms vanish).
    """
    grid = diffusion.grid
    if density_diff.grid != grid or value_diff.grid != grid:
        raise ConfigurationError("fields live on different grids")
    eta_s = adapted_mollify(diffusion, density_diff, width)
    v_s = spatial_mollify(value_diff, width, passes=2)
    term1 = integrate_values(
        grid, density_diff.values * diffusion.values * _laplacian(v_s).values
    )
    a_eta = PeriodicField(grid, diffusion.values * eta_s.values)
    grad_u = gradient(value_diff)
    grad_ae = gradient(a_eta)
    term2 = integrate_values(grid, np.sum(grad_u.values * grad_ae.values, axis=0))
    scale = abs(term1) + abs(term2)
    if scale == 0.0:
        return 0.0
    return abs(term1 + term2) / scale
