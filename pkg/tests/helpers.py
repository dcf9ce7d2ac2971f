"""Shared helpers for the test suite: seeded smooth field generators."""

from __future__ import annotations

import math

import numpy as np

from mfglab.torus import Grid, PeriodicField, integrate, nodes


def mode_indices(d: int, max_mode: int) -> list[tuple[int, ...]]:
    """Integer wave vectors with 0 < max|k_i| <= max_mode, one per +/- pair."""
    if d == 1:
        return [(k,) for k in range(1, max_mode + 1)]
    out = []
    for k1 in range(0, max_mode + 1):
        for k2 in range(-max_mode, max_mode + 1):
            if k1 == 0 and k2 <= 0:
                continue
            out.append((k1, k2))
    return out


def random_band_limited(
    grid: Grid,
    rng: np.random.Generator,
    max_mode: int = 3,
    amplitude: float = 0.3,
    mean: float = 0.0,
) -> PeriodicField:
    """Smooth random field: mean + sum of cos/sin modes up to max_mode per axis.

    Per-mode coefficients are normal with standard deviation amplitude/#modes,
    so the overall size is set by `amplitude` regardless of the mode count.
    """
    xs = nodes(grid)
    values = np.full(grid.shape, float(mean))
    modes = mode_indices(grid.d, max_mode)
    scale = amplitude / max(len(modes), 1)
    for k in modes:
        phase = 2.0 * math.pi * sum(ki * xi for ki, xi in zip(k, xs))
        values = values + rng.normal(0.0, scale) * np.cos(phase)
        values = values + rng.normal(0.0, scale) * np.sin(phase)
    return PeriodicField(grid, values)


def random_positive_density(
    grid: Grid,
    rng: np.random.Generator,
    max_mode: int = 3,
    amplitude: float = 0.3,
    floor: float = 0.2,
) -> PeriodicField:
    """Random smooth density: 1 + band-limited perturbation, clipped away from
    zero, renormalized to unit mass."""
    pert = random_band_limited(grid, rng, max_mode=max_mode, amplitude=amplitude)
    values = np.clip(1.0 + pert.values, floor, None)
    f = PeriodicField(grid, values)
    mass = integrate(f)
    return PeriodicField(grid, values / mass, is_density=True)
