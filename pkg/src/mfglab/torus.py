"""Fourier spectral calculus on the unit periodic torus in one or two dimensions.

Grids are uniform with n nodes per axis (n a power of two), spacing 1/n and
quadrature weight 1/n^d, so the discrete integral of the constant 1 is exactly 1.
Derivatives are exact for band-limited fields: gradient and divergence share one
multiplier table (Nyquist row zeroed for odd derivatives), which makes them exact
negative adjoints of each other under the node quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, DomainError, ResolutionError

_TWO_PI = 2.0 * math.pi
_LOG_FLOAT_MAX = math.log(np.finfo(np.float64).max)


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [0,1)^d. Build through make_grid."""

    d: int
    n: int

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def quadrature_weight(self) -> float:
        return self.spacing**self.d

    @property
    def size(self) -> int:
        return self.n**self.d


def make_grid(d: int, n: int) -> Grid:
    if d not in (1, 2):
        raise ConfigurationError(f"dimension must be 1 or 2, got {d}")
    if n < 8 or (n & (n - 1)) != 0:
        raise ConfigurationError(f"nodes per axis must be a power of two >= 8, got {n}")
    return Grid(d=d, n=n)


def nodes(grid: Grid) -> tuple[np.ndarray, ...]:
    """Coordinate arrays (indexing='ij'), broadcastable to grid.shape."""
    axes = [np.arange(grid.n) * grid.spacing for _ in range(grid.d)]
    return tuple(np.meshgrid(*axes, indexing="ij")) if grid.d > 1 else (axes[0],)


@dataclass(eq=False)
class PeriodicField:
    """Real nodal samples of a periodic function on the grid."""

    grid: Grid
    values: np.ndarray
    is_density: bool = False

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ConfigurationError(
                f"field shape {self.values.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise DomainError("field contains non-finite samples")
        if self.is_density and self.values.min() <= 0.0:
            raise DomainError(
                f"density must be positive everywhere; min sample = {self.values.min():g}"
            )

    def min_value(self) -> float:
        return float(self.values.min())


@dataclass(eq=False)
class VectorField:
    """d real component fields on a shared grid, stacked along axis 0."""

    grid: Grid
    values: np.ndarray  # shape (d,) + grid.shape

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        expected = (self.grid.d,) + self.grid.shape
        if self.values.shape != expected:
            raise ConfigurationError(
                f"vector field shape {self.values.shape} does not match {expected}"
            )
        if not np.all(np.isfinite(self.values)):
            raise DomainError("vector field contains non-finite samples")

    def component(self, i: int) -> PeriodicField:
        return PeriodicField(self.grid, self.values[i])


def constant_field(grid: Grid, c: float) -> PeriodicField:
    return PeriodicField(grid, np.full(grid.shape, float(c)))


def field_like(f: PeriodicField, values: np.ndarray) -> PeriodicField:
    return PeriodicField(f.grid, values)


# ---------------------------------------------------------------------------
# Spectral tables
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class SpectralTables:
    """Frequency multipliers for one grid, in both rfftn and full-fftn layouts.

    ``ik_r``/``ik_f``: per-axis first-derivative multipliers 2*pi*i*xi with the
    Nyquist mode zeroed (odd derivative of a real field has no well-defined
    Nyquist component; zeroing it keeps gradient/divergence exact adjoints).
    ``xi_sq_r``/``xi_sq_f``: |xi|^2 with full Nyquist weight (even derivatives).
    """

    shape: tuple[int, ...]
    ik_r: tuple[np.ndarray, ...]
    ik_f: tuple[np.ndarray, ...]
    xi_sq_r: np.ndarray
    xi_sq_f: np.ndarray
    max_xi_sq: float


@lru_cache(maxsize=None)
def spectral_tables(grid: Grid) -> SpectralTables:
    n, d = grid.n, grid.d
    full = np.fft.fftfreq(n, d=1.0 / n)  # integer wave numbers
    half = np.fft.rfftfreq(n, d=1.0 / n)
    odd_full = full.copy()
    odd_full[n // 2] = 0.0  # Nyquist zeroed for odd derivatives
    odd_half = half.copy()
    odd_half[-1] = 0.0

    def axis_view(vec: np.ndarray, axis: int, ndim: int) -> np.ndarray:
        shape = [1] * ndim
        shape[axis] = len(vec)
        return vec.reshape(shape)

    ik_r, ik_f = [], []
    for axis in range(d):
        vec_r = odd_half if axis == d - 1 else odd_full
        ik_r.append(_TWO_PI * 1j * axis_view(vec_r, axis, d))
        ik_f.append(_TWO_PI * 1j * axis_view(odd_full, axis, d))

    xi_sq_r = np.zeros((n,) * (d - 1) + (n // 2 + 1,))
    xi_sq_f = np.zeros((n,) * d)
    for axis in range(d):
        vec_r = half if axis == d - 1 else full
        xi_sq_r = xi_sq_r + axis_view(vec_r, axis, d) ** 2
        xi_sq_f = xi_sq_f + axis_view(full, axis, d) ** 2
    return SpectralTables(
        shape=grid.shape,
        ik_r=tuple(ik_r),
        ik_f=tuple(ik_f),
        xi_sq_r=xi_sq_r,
        xi_sq_f=xi_sq_f,
        max_xi_sq=float(d * (n // 2) ** 2),
    )


# ---------------------------------------------------------------------------
# Calculus operations
# ---------------------------------------------------------------------------


def _irfftn(coeffs: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    return np.fft.irfftn(coeffs, s=shape, axes=tuple(range(len(shape))))


def gradient(f: PeriodicField) -> VectorField:
    """Spectral gradient; exact (to roundoff) below the Nyquist mode."""
    tab = spectral_tables(f.grid)
    coeffs = np.fft.rfftn(f.values)
    parts = [_irfftn(ik * coeffs, f.grid.shape) for ik in tab.ik_r]
    return VectorField(f.grid, np.stack(parts))


def divergence(v: VectorField) -> PeriodicField:
    """Spectral divergence; exact negative adjoint of gradient."""
    tab = spectral_tables(v.grid)
    out = np.zeros(v.grid.shape)
    for axis in range(v.grid.d):
        coeffs = np.fft.rfftn(v.values[axis])
        out = out + _irfftn(tab.ik_r[axis] * coeffs, v.grid.shape)
    return PeriodicField(v.grid, out)


def laplacian_power(f: PeriodicField, j: int) -> PeriodicField:
    """Apply the j-th power of the Laplacian: multiplier (-4*pi^2*|xi|^2)^j."""
    if not isinstance(j, int) or j < 1:
        raise ConfigurationError(f"Laplacian power must be an integer >= 1, got {j}")
    tab = spectral_tables(f.grid)
    top = _TWO_PI**2 * tab.max_xi_sq
    if j * math.log(top) > _LOG_FLOAT_MAX:
        raise ResolutionError(
            f"Laplacian power {j} overflows float64 at n={f.grid.n} "
            f"(top multiplier exp({j * math.log(top):.1f}))"
        )
    mult = (-(_TWO_PI**2) * tab.xi_sq_r) ** j
    coeffs = np.fft.rfftn(f.values)
    return PeriodicField(f.grid, _irfftn(mult * coeffs, f.grid.shape))


def integrate(f: PeriodicField) -> float:
    """Node quadrature: (1/n^d) * sum of samples, summed exactly (fsum)."""
    return math.fsum(f.values.ravel()) * f.grid.quadrature_weight


def integrate_values(grid: Grid, values: np.ndarray) -> float:
    return math.fsum(np.asarray(values, dtype=np.float64).ravel()) * grid.quadrature_weight


def inner_product(f: PeriodicField, g: PeriodicField) -> float:
    """L^2 pairing of two scalar fields under the node quadrature."""
    if f.grid != g.grid:
        raise ConfigurationError("inner product requires a shared grid")
    return integrate_values(f.grid, f.values * g.values)


def l2_norm(f: PeriodicField) -> float:
    return math.sqrt(max(integrate_values(f.grid, f.values**2), 0.0))


def h1_norm(f: PeriodicField) -> float:
    """sqrt( int f^2 + int |grad f|^2 )."""
    grad = gradient(f)
    total = integrate_values(f.grid, f.values**2)
    for axis in range(f.grid.d):
        total += integrate_values(f.grid, grad.values[axis] ** 2)
    return math.sqrt(max(total, 0.0))


def require_positive(f: PeriodicField, what: str = "density") -> None:
    m = f.min_value()
    if m <= 0.0:
        raise DomainError(f"{what} must be positive everywhere; min sample = {m:g}")


# ---------------------------------------------------------------------------
# Space-time fields (uniform time grid on [t0, t1]; spatial grid per slice)
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class SpaceTimeField:
    """Nodal samples on a uniform time grid times a periodic spatial grid.

    values has shape (nt,) + grid.shape; times is the matching 1-D array.
    """

    grid: Grid
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.times.ndim != 1 or len(self.times) < 2:
            raise ConfigurationError("time grid needs at least two samples")
        steps = np.diff(self.times)
        if not np.allclose(steps, steps[0], rtol=1e-12, atol=1e-14):
            raise ConfigurationError("time grid must be uniform")
        if self.values.shape != (len(self.times),) + self.grid.shape:
            raise ConfigurationError(
                f"space-time values shape {self.values.shape} does not match "
                f"{(len(self.times),) + self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise DomainError("space-time field contains non-finite samples")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def slice(self, i: int) -> PeriodicField:
        return PeriodicField(self.grid, self.values[i])


def spacetime_from_slices(grid: Grid, times: np.ndarray, slices: list[np.ndarray]) -> SpaceTimeField:
    return SpaceTimeField(grid, np.asarray(times), np.stack(slices))


def spacetime_constant(grid: Grid, times: np.ndarray, spatial: np.ndarray) -> SpaceTimeField:
    """A field constant in time, equal to the given spatial slice at every node."""
    nt = len(np.asarray(times))
    return SpaceTimeField(grid, times, np.broadcast_to(spatial, (nt,) + grid.shape).copy())
