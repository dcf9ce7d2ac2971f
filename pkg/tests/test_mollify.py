"""Mollifier toolkit: spatial/adapted smoothing, one-sided time kernels,
boundary-compatible approximation."""

from __future__ import annotations

import math

import numpy as np
import pytest

from helpers import random_band_limited, random_positive_density
from mfglab.errors import ConfigurationError, DomainError, ParameterError
from mfglab.mollify import (
    MollifierParams,
    ZeroExtendedSeries,
    adapted_mollify,
    boundary_compatible_approx,
    one_sided_time_mollify,
    overlap_pairing,
    spatial_mollify,
    symmetric_time_kernel,
    symmetry_pairing_residual,
    zero_extend_time,
    _bump,
    _one_sided_taps,
)
from mfglab.torus import (
    PeriodicField,
    SpaceTimeField,
    constant_field,
    integrate,
    make_grid,
    nodes,
    spacetime_constant,
)

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# parameters and kernels
# ---------------------------------------------------------------------------


def test_params_validation():
    MollifierParams(delta=0.1, rho=0.2, h=0.2, lam=0.05)
    with pytest.raises(ParameterError):
        MollifierParams(delta=0.6, rho=0.2, h=0.2, lam=0.05)
    with pytest.raises(ParameterError):
        MollifierParams(delta=0.1, rho=0.0, h=0.2, lam=0.05)
    with pytest.raises(ParameterError):
        MollifierParams(delta=0.1, rho=0.2, h=-0.1, lam=0.05)
    with pytest.raises(ParameterError):
        MollifierParams(delta=0.1, rho=0.2, h=0.2, lam=0.1)  # lam must be < h/2


def test_time_kernel_is_symmetric_normalized_nonnegative():
    k = symmetric_time_kernel(1.0 / 32, 0.1)
    assert np.all(k.samples >= 0.0)
    assert np.array_equal(k.samples, k.samples[::-1])  # bitwise even
    assert abs(k.samples.sum() * k.spacing - 1.0) <= 1e-15


def test_one_sided_taps_support_and_normalization():
    dt = 1.0 / 32
    taps = _one_sided_taps(dt, 0.2)
    assert len(taps) == math.ceil(0.2 / dt) - 1
    assert np.all(taps >= 0.0)
    assert abs(taps.sum() * dt - 1.0) <= 1e-15
    with pytest.raises(ParameterError):
        _one_sided_taps(dt, 0.0)
    with pytest.raises(ParameterError):
        _one_sided_taps(dt, dt)  # no interior taps


def test_bump_is_even_and_compact():
    half = np.linspace(0, 2, 21)
    u = np.concatenate([-half[::-1], half[1:]])  # exactly mirrored nodes
    b = _bump(u)
    assert np.array_equal(b, b[::-1])
    assert np.all(b[np.abs(u) >= 1.0] == 0.0)
    assert b[20] == math.exp(-1.0)  # u = 0


# ---------------------------------------------------------------------------
# spatial mollification
# ---------------------------------------------------------------------------


def test_spatial_mollify_preserves_constants():
    g = make_grid(1, 64)
    f = constant_field(g, 3.25)
    out = spatial_mollify(f, 0.1, passes=2)
    assert np.max(np.abs(out.values - 3.25)) <= 1e-13


@pytest.mark.parametrize("d,n", [(1, 64), (2, 16)])
def test_spatial_mollify_preserves_mass(d, n):
    g = make_grid(d, n)
    rng = np.random.default_rng(5)
    f = random_band_limited(g, rng, max_mode=4, amplitude=1.0, mean=0.7)
    out = spatial_mollify(f, 0.15, passes=2)
    assert abs(integrate(out) - integrate(f)) <= 1e-13


def test_spatial_mollify_error_decreases_with_width():
    g = make_grid(1, 64)
    (x,) = nodes(g)
    f = PeriodicField(g, np.sin(TWO_PI * x))
    errors = []
    for delta in (0.2, 0.1, 0.05):
        out = spatial_mollify(f, delta, passes=2)
        errors.append(math.sqrt(integrate(PeriodicField(g, (out.values - f.values) ** 2))))
    assert errors[0] > errors[1] > errors[2]


def test_spatial_mollify_rejects_bad_width_and_passes():
    g = make_grid(1, 32)
    f = constant_field(g, 1.0)
    with pytest.raises(ParameterError):
        spatial_mollify(f, 0.5, passes=1)
    with pytest.raises(ParameterError):
        spatial_mollify(f, -0.1, passes=1)
    with pytest.raises(ParameterError):
        spatial_mollify(f, 0.1, passes=3)


def test_symmetry_pairing_residual_identical_fields_is_exact_zero():
    g = make_grid(1, 64)
    rng = np.random.default_rng(9)
    f = random_band_limited(g, rng, max_mode=6, amplitude=1.0, mean=0.3)
    assert symmetry_pairing_residual(f, f, 0.1) == 0.0


def test_symmetry_pairing_residual_constant_left_factor():
    g = make_grid(1, 64)
    rng = np.random.default_rng(10)
    f = constant_field(g, 2.0)
    h = random_band_limited(g, rng, max_mode=6, amplitude=1.0)
    assert abs(symmetry_pairing_residual(f, h, 0.1)) <= 1e-13


@pytest.mark.parametrize("d,n", [(1, 64), (2, 16)])
def test_symmetry_pairing_residual_random_fields(d, n):
    g = make_grid(d, n)
    rng = np.random.default_rng(11)
    for _ in range(5):
        f = random_band_limited(g, rng, max_mode=4, amplitude=1.0, mean=0.5)
        h = random_band_limited(g, rng, max_mode=4, amplitude=1.0, mean=-0.2)
        scale = abs(integrate(PeriodicField(g, f.values * h.values))) + 1.0
        assert abs(symmetry_pairing_residual(f, h, 0.1)) <= 1e-12 * scale


def test_adapted_mollify_unit_coefficient_reduces_to_double_pass():
    g = make_grid(1, 64)
    rng = np.random.default_rng(12)
    f = random_band_limited(g, rng, max_mode=5, amplitude=1.0, mean=0.4)
    a = constant_field(g, 1.0)
    out = adapted_mollify(a, f, 0.1)
    ref = spatial_mollify(f, 0.1, passes=2)
    assert np.max(np.abs(out.values - ref.values)) <= 1e-13


def test_adapted_mollify_rejects_nonpositive_coefficient():
    g = make_grid(1, 32)
    a = PeriodicField(g, np.linspace(-0.5, 1.0, 32))
    f = constant_field(g, 1.0)
    with pytest.raises(DomainError):
        adapted_mollify(a, f, 0.1)


def test_adapted_mollify_constant_input_against_direct_convolution():
    # independent oracle: direct circular convolution with the normalized bump taps
    g = make_grid(1, 64)
    (x,) = nodes(g)
    a = PeriodicField(g, 1.0 + 0.3 * np.cos(TWO_PI * x))
    c = 1.7
    delta = 0.1
    out = adapted_mollify(a, constant_field(g, c), delta)

    offsets = (np.arange(g.n) * g.spacing + 0.5) % 1.0 - 0.5
    u = offsets / delta
    line = np.where(np.abs(u) < 1.0, np.exp(-1.0 / np.maximum(1.0 - u**2, 1e-300)), 0.0)
    w = line / line.sum()
    smoothed = a.values * c
    for _ in range(2):
        conv = np.zeros(g.n)
        for j in range(g.n):
            conv += w[j] * np.roll(smoothed, j)
        smoothed = conv
    expected = smoothed / a.values
    assert np.max(np.abs(out.values - expected)) <= 1e-12 * (np.max(np.abs(expected)) + 1.0)
    # a nonconstant coefficient does not preserve constants
    assert np.max(np.abs(out.values - c)) > 1e-6


# ---------------------------------------------------------------------------
# time direction
# ---------------------------------------------------------------------------


def _spacetime(grid, t0, t1, nt, fn):
    times = np.linspace(t0, t1, nt)
    (x,) = nodes(grid)
    values = np.stack([fn(t, x) for t in times])
    return SpaceTimeField(grid, times, values)


def test_one_sided_zero_input_gives_zero():
    g = make_grid(1, 8)
    f = _spacetime(g, 0.0, 1.0, 33, lambda t, x: np.zeros_like(x))
    out = one_sided_time_mollify(f, 0.2, "forward", passes=2)
    assert np.all(out.values == 0.0)


def test_one_sided_forward_support_is_exact():
    g = make_grid(1, 8)
    # vanishes for t <= 0 (node at t=0 included), smooth afterwards
    f = _spacetime(g, -0.5, 1.0, 49, lambda t, x: max(t, 0.0) ** 2 * (1.0 + np.cos(TWO_PI * x)))
    out = one_sided_time_mollify(zero_extend_time(f), 0.2, "forward", passes=2)
    early = out.times <= 1e-12
    assert np.all(out.values[early] == 0.0)
    late = out.times > 0.3
    assert np.max(np.abs(out.values[late])) > 0.0


def test_one_sided_backward_support_mirrors_forward():
    g = make_grid(1, 8)
    f = _spacetime(g, 0.0, 1.5, 49, lambda t, x: max(1.0 - t, 0.0) ** 2 * np.ones_like(x))
    out = one_sided_time_mollify(f, 0.2, "backward", passes=2)
    # input vanishes for t >= 1; backward kernel looks forward in time only
    tail = out.times >= 1.0 - 1e-12
    assert np.all(out.values[tail] == 0.0)


def test_one_sided_interior_constant_preserved():
    g = make_grid(1, 8)
    f = _spacetime(g, 0.0, 2.0, 65, lambda t, x: 1.5 * np.ones_like(x))
    out = one_sided_time_mollify(f, 0.2, "forward", passes=1)
    interior = (out.times > 0.25) & (out.times < 1.95)
    assert np.max(np.abs(out.values[interior] - 1.5)) <= 1e-14


@pytest.mark.parametrize("passes", [1, 2])
def test_one_sided_adjointness(passes):
    g = make_grid(1, 16)
    rng = np.random.default_rng(21)
    times = np.linspace(0.0, 1.0, 33)
    (x,) = nodes(g)

    def rand_st():
        values = np.stack(
            [
                random_band_limited(g, rng, max_mode=3, amplitude=1.0).values
                * math.sin(2.2 * t + rng.normal())
                for t in times
            ]
        )
        return SpaceTimeField(g, times, values)

    for _ in range(3):
        f, h = rand_st(), rand_st()
        lhs = overlap_pairing(f, one_sided_time_mollify(h, 0.2, "backward", passes))
        rhs = overlap_pairing(h, one_sided_time_mollify(f, 0.2, "forward", passes))
        assert abs(lhs - rhs) <= 1e-11 * (abs(lhs) + abs(rhs) + 1.0)


def test_one_sided_parameter_errors():
    g = make_grid(1, 8)
    f = _spacetime(g, 0.0, 1.0, 33, lambda t, x: np.ones_like(x))
    with pytest.raises(ParameterError):
        one_sided_time_mollify(f, 0.0, "forward")
    with pytest.raises(ParameterError):
        one_sided_time_mollify(f, -1.0, "backward")
    with pytest.raises(ParameterError):
        one_sided_time_mollify(f, 0.01, "forward")  # below the time step
    with pytest.raises(ParameterError):
        one_sided_time_mollify(f, 0.2, "sideways")


def test_zero_extend_time_sampling():
    g = make_grid(1, 8)
    f = _spacetime(g, 0.0, 1.0, 33, lambda t, x: (1.0 + t) * np.ones_like(x))
    ext = zero_extend_time(f, horizon=1.0)
    assert np.all(ext.sample(-0.1) == 0.0)
    assert np.all(ext.sample(1.1) == 0.0)
    assert np.allclose(ext.sample(0.5), 1.5)
    with pytest.raises(ParameterError):
        zero_extend_time(f, horizon=0.5)


# ---------------------------------------------------------------------------
# boundary-compatible approximation
# ---------------------------------------------------------------------------


def _smooth_positive_spacetime(grid, times, rng, floor=0.5):
    (x,) = nodes(grid)
    values = np.stack(
        [
            floor
            + 0.5
            + 0.2 * np.cos(TWO_PI * x + 0.5 * t)
            + 0.05 * rng.normal() * np.sin(TWO_PI * 2 * x)
            for t in times
        ]
    )
    return SpaceTimeField(grid, times, values)


def test_boundary_compatible_identity_case():
    g = make_grid(1, 16)
    times = np.linspace(0.0, 1.0, 33)
    rng = np.random.default_rng(31)
    m0 = random_positive_density(g, rng, amplitude=0.2)
    uT = random_band_limited(g, rng, max_mode=3, amplitude=0.5)
    eta = spacetime_constant(g, times, m0.values)
    v = spacetime_constant(g, times, uT.values)
    params = MollifierParams(delta=0.1, rho=0.2, h=0.25, lam=0.1)
    eta_out, v_out = boundary_compatible_approx(eta, v, m0, uT, params)
    assert np.max(np.abs(eta_out.values - eta.values)) <= 1e-12
    assert np.max(np.abs(v_out.values - v.values)) <= 1e-12


def test_boundary_compatible_exact_traces():
    g = make_grid(1, 16)
    times = np.linspace(0.0, 1.0, 33)
    rng = np.random.default_rng(32)
    eta = _smooth_positive_spacetime(g, times, rng)
    v = _spacetime(g, 0.0, 1.0, 33, lambda t, x: 0.3 * np.sin(TWO_PI * x) * (1 + t))
    m0 = random_positive_density(g, rng, amplitude=0.2)
    uT = random_band_limited(g, rng, max_mode=2, amplitude=0.4)
    params = MollifierParams(delta=0.1, rho=0.2, h=0.25, lam=0.08)
    eta_out, v_out = boundary_compatible_approx(eta, v, m0, uT, params)
    # nodewise-exact trace matching at the corrected ends
    assert np.array_equal(eta_out.values[0], m0.values)
    assert np.array_equal(v_out.values[-1], uT.values)
    # and the smoothed density respects the positivity floor
    floor = 0.5 * min(eta.values.min(), m0.min_value())
    assert eta_out.values.min() >= floor


def test_boundary_compatible_parameter_and_domain_errors():
    g = make_grid(1, 16)
    times = np.linspace(0.0, 1.0, 33)
    rng = np.random.default_rng(33)
    eta = _smooth_positive_spacetime(g, times, rng)
    v = spacetime_constant(g, times, np.zeros(16))
    m0 = random_positive_density(g, rng, amplitude=0.2)
    uT = constant_field(g, 0.0)
    with pytest.raises(ParameterError):
        # shift not resolved by the time grid (h below one step)
        boundary_compatible_approx(
            eta, v, m0, uT, MollifierParams(delta=0.1, rho=0.2, h=0.01, lam=0.004)
        )
    bad_eta = SpaceTimeField(g, times, eta.values - 2.0)
    with pytest.raises(DomainError):
        boundary_compatible_approx(
            bad_eta, v, m0, uT, MollifierParams(delta=0.1, rho=0.2, h=0.25, lam=0.08)
        )
    with pytest.raises(ConfigurationError):
        g2 = make_grid(1, 32)
        m0_wrong = constant_field(g2, 1.0)
        boundary_compatible_approx(
            eta, v, m0_wrong, uT, MollifierParams(delta=0.1, rho=0.2, h=0.25, lam=0.08)
        )
