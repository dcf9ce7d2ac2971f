"""Mollification toolkit: periodic spatial mollifiers, coefficient-adapted double
mollification, one-sided time mollifiers, zero extensions in time, and the
boundary-compatible smooth approximation of space-time pairs.

Spatial mollification is carried out in frequency space with a kernel spectrum
forced exactly real and even, and normalized so the mode-0 gain is exactly 1.0:
mass preservation and the pairing-symmetry identity then hold to raw roundoff.
Time-direction convolutions use direct tap loops so support arithmetic is exact
sample-wise (an output that should vanish for t <= 0 is a sum of exact zeros).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, DomainError, ParameterError
from .torus import Grid, PeriodicField, SpaceTimeField, integrate_values

__all__ = [
    "MollifierParams",
    "Kernel1D",
    "spatial_mollify",
    "symmetry_pairing_residual",
    "adapted_mollify",
    "one_sided_time_mollify",
    "zero_extend_time",
    "ZeroExtendedSeries",
    "overlap_pairing",
    "boundary_compatible_approx",
]


@dataclass(frozen=True)
class MollifierParams:
    """Widths for the smoothing pipeline: spatial delta, temporal rho, time
    shift h, and space-time width lam (which must satisfy lam < h/2)."""

    delta: float
    rho: float
    h: float
    lam: float

    def __post_init__(self) -> None:
        if not (0.0 < self.delta < 0.5):
            raise ParameterError(f"spatial width must lie in (0, 1/2), got {self.delta}")
        if self.rho <= 0.0:
            raise ParameterError(f"temporal width must be positive, got {self.rho}")
        if self.h <= 0.0:
            raise ParameterError(f"time shift must be positive, got {self.h}")
        if not (0.0 < self.lam < self.h / 2.0):
            raise ParameterError(
                f"space-time width must lie in (0, h/2) = (0, {self.h / 2.0}), got {self.lam}"
            )
        if self.lam >= 0.5:
            raise ParameterError(
                f"space-time width doubles as a spatial width and must stay below 1/2, got {self.lam}"
            )


def _bump(u: np.ndarray) -> np.ndarray:
    """Compactly supported bump exp(-1/(1-u^2)) on |u|<1, evaluated through u^2
    so the samples are bitwise even in u."""
    u_sq = np.asarray(u, dtype=np.float64) ** 2
    out = np.zeros_like(u_sq)
    inside = u_sq < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - u_sq[inside]))
    return out


@dataclass(eq=False)
class Kernel1D:
    """Taps of a nonnegative symmetric compactly supported bump on a uniform
    1-D grid, normalized to unit discrete integral (sum * spacing = 1)."""

    spacing: float
    radius: float
    samples: np.ndarray  # taps at offsets j*spacing, j in [-J..J]

    def __post_init__(self) -> None:
        if len(self.samples) % 2 != 1:
            raise ParameterError("symmetric kernel needs an odd tap count")

    @property
    def tap_radius(self) -> int:
        return (len(self.samples) - 1) // 2


def symmetric_time_kernel(spacing: float, width: float) -> Kernel1D:
    """Symmetric bump of the given width sampled on a uniform time grid."""
    if width <= 0.0:
        raise ParameterError(f"kernel width must be positive, got {width}")
    taps = max(int(math.ceil(width / spacing)) - 1, 0)
    offsets = np.arange(-taps, taps + 1) * spacing
    raw = _bump(offsets / width)
    total = raw.sum() * spacing
    if total <= 0.0:
        raise ParameterError(
            f"kernel width {width} is below the grid step {spacing}; no interior taps"
        )
    return Kernel1D(spacing=spacing, radius=width, samples=raw / total)


def _one_sided_taps(spacing: float, rho: float) -> np.ndarray:
    """Forward-kernel taps at offsets j*spacing, j = 1..J, supported in (0, rho):
    the symmetric bump of width rho/2, centered at rho/2."""
    if rho <= 0.0:
        raise ParameterError(f"temporal width must be positive, got {rho}")
    half = rho / 2.0
    j_max = int(math.ceil(rho / spacing)) - 1
    if j_max < 1:
        raise ParameterError(f"temporal width {rho} is not resolved by the time step {spacing}")
    offsets = np.arange(1, j_max + 1) * spacing
    raw = _bump((offsets - half) / half)
    total = raw.sum() * spacing
    if total <= 0.0:
        raise ParameterError(f"temporal width {rho} is not resolved by the time step {spacing}")
    return raw / total


@lru_cache(maxsize=None)
def _spatial_kernel_spectrum(grid: Grid, delta: float) -> np.ndarray:
    """rfftn spectrum (real, even, mode-0 gain exactly 1) of the periodic
    tensor-product bump of width delta."""
    n = grid.n
    offsets = (np.arange(n) * grid.spacing + 0.5) % 1.0 - 0.5  # exact +/- pairs
    line = _bump(offsets / delta)
    half = np.fft.rfft(line).real
    half = half / half[0]
    if grid.d == 1:
        return half
    full = np.fft.fft(line).real
    full = full / full[0]
    return np.outer(full, half)


def _convolve_spatial(grid: Grid, values: np.ndarray, delta: float, passes: int) -> np.ndarray:
    spectrum = _spatial_kernel_spectrum(grid, delta)
    coeffs = np.fft.rfftn(values) * spectrum**passes
    return np.fft.irfftn(coeffs, s=grid.shape, axes=tuple(range(grid.d)))


def spatial_mollify(f: PeriodicField, delta: float, passes: int = 1) -> PeriodicField:
    """Periodic convolution with the bump kernel of width delta (passes in {1,2})."""
    if not (0.0 < delta < 0.5):
        raise ParameterError(f"spatial width must lie in (0, 1/2), got {delta}")
    if passes not in (1, 2):
        raise ParameterError(f"passes must be 1 or 2, got {passes}")
    return PeriodicField(f.grid, _convolve_spatial(f.grid, f.values, delta, passes))


def symmetry_pairing_residual(f: PeriodicField, g: PeriodicField, delta: float) -> float:
    """int f*(theta conv g) - int (theta conv f)*g; vanishes to roundoff because
    the kernel spectrum is exactly real."""
    if f.grid != g.grid:
        raise ConfigurationError("pairing requires a shared grid")
    smoothed_g = _convolve_spatial(f.grid, g.values, delta, 1)
    smoothed_f = _convolve_spatial(f.grid, f.values, delta, 1)
    return integrate_values(f.grid, f.values * smoothed_g) - integrate_values(
        f.grid, smoothed_f * g.values
    )


def adapted_mollify(a: PeriodicField, f: PeriodicField, delta: float) -> PeriodicField:
    """Coefficient-adapted double mollification (1/a) * theta conv theta conv (a*f)."""
    if a.grid != f.grid:
        raise ConfigurationError("adapted mollification requires a shared grid")
    if a.min_value() <= 0.0:
        raise DomainError(f"coefficient must be positive; min sample = {a.min_value():g}")
    if not (0.0 < delta < 0.5):
        raise ParameterError(f"spatial width must lie in (0, 1/2), got {delta}")
    smoothed = _convolve_spatial(f.grid, a.values * f.values, delta, 2)
    return PeriodicField(f.grid, smoothed / a.values)


# ---------------------------------------------------------------------------
# Time direction
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ZeroExtendedSeries:
    """A finite space-time record regarded as a function on the whole time axis,
    equal to zero outside the recorded window."""

    field: SpaceTimeField

    def sample(self, t: float) -> np.ndarray:
        f = self.field
        if t < f.t0 - 1e-12 or t > f.t1 + 1e-12:
            return np.zeros(f.grid.shape)
        i = min(max(int(round((t - f.t0) / f.dt)), 0), len(f.times) - 1)
        return f.values[i]


def zero_extend_time(f: SpaceTimeField, horizon: float | None = None) -> ZeroExtendedSeries:
    """Regard f (recorded on [t0, t1]) as zero outside its window."""
    if horizon is not None and horizon < f.t1 - 1e-12:
        raise ParameterError(f"horizon {horizon} is shorter than the recorded window end {f.t1}")
    return ZeroExtendedSeries(field=f)


def one_sided_time_mollify(
    f: SpaceTimeField | ZeroExtendedSeries,
    rho: float,
    direction: str,
    passes: int = 1,
) -> SpaceTimeField:
    """Convolve in time with a one-sided kernel supported in (0, rho) (forward)
    or (-rho, 0) (backward), treating the input as zero outside its window.

    The output window grows by passes*rho on the side the support points to, so
    the full support of the result stays recorded. Forward taps act strictly on
    earlier samples, so an input vanishing for t <= 0 yields an output that
    vanishes there exactly; the backward kernel mirrors the forward one
    sample-for-sample, which is what makes the two operators exact adjoints.
    """
    if isinstance(f, ZeroExtendedSeries):
        f = f.field
    if direction not in ("forward", "backward"):
        raise ParameterError(f"direction must be 'forward' or 'backward', got {direction!r}")
    if passes not in (1, 2):
        raise ParameterError(f"passes must be 1 or 2, got {passes}")
    dt = f.dt
    taps = _one_sided_taps(dt, rho)
    j_max = len(taps)
    grow = passes * j_max
    nt = len(f.times)

    work = np.zeros((nt + 2 * grow,) + f.grid.shape)
    work[grow : grow + nt] = f.values  # row r holds time t0 + (r - grow)*dt
    weights = taps * dt
    for _ in range(passes):
        out = np.zeros_like(work)
        for j in range(1, j_max + 1):
            if direction == "forward":
                out[j:] += weights[j - 1] * work[:-j]
            else:
                out[:-j] += weights[j - 1] * work[j:]
        work = out
    times = f.t0 + (np.arange(nt + 2 * grow) - grow) * dt
    keep = slice(grow, None) if direction == "forward" else slice(0, nt + grow)
    return SpaceTimeField(f.grid, times[keep], work[keep])


def overlap_pairing(f: SpaceTimeField, g: SpaceTimeField) -> float:
    """Space-time integral of f*g with both records zero-extended: windows are
    aligned by time value and the product is summed where both are recorded."""
    if f.grid != g.grid:
        raise ConfigurationError("pairing requires a shared spatial grid")
    if abs(f.dt - g.dt) > 1e-12 * max(f.dt, g.dt):
        raise ConfigurationError("pairing requires a shared time step")
    dt = f.dt
    offset = (g.t0 - f.t0) / dt
    k = int(round(offset))
    if abs(offset - k) > 1e-9:
        raise ConfigurationError("time grids are not aligned to a common lattice")
    # g's row j holds the same time as f's row j + k
    lo = max(0, k)
    hi = min(len(f.times), len(g.times) + k)
    if lo >= hi:
        return 0.0
    products = f.values[lo:hi] * g.values[lo - k : hi - k]
    return math.fsum(products.ravel()) * dt * f.grid.quadrature_weight


# ---------------------------------------------------------------------------
# Boundary-compatible smooth approximation
# ---------------------------------------------------------------------------


def boundary_compatible_approx(
    eta: SpaceTimeField,
    v: SpaceTimeField,
    m0: PeriodicField,
    uT: PeriodicField,
    params: MollifierParams,
) -> tuple[SpaceTimeField, SpaceTimeField]:
    """Shifted space-time mollification of (eta, v): the first output matches m0
    at t=0 exactly (nodewise), the second matches uT at t=T exactly, and the
    first stays above half the floor of its inputs.

    eta is extended by m0 before t=0 and shifted later in time by h; v is
    extended by uT after t=T and shifted earlier by h; both are mollified with a
    tensor-product space-time kernel of width lam. Since lam < h/2, the kernel
    window at the matched end sees only the constant extension, so the boundary
    slice passes through bitwise.
    """
    if eta.grid != v.grid or eta.grid != m0.grid or eta.grid != uT.grid:
        raise ConfigurationError("all inputs must share one spatial grid")
    if len(eta.times) != len(v.times) or abs(eta.t0 - v.t0) > 1e-12 or abs(eta.t1 - v.t1) > 1e-12:
        raise ConfigurationError("eta and v must share one time grid")
    if eta.values.min() <= 0.0:
        raise DomainError("eta must be positive everywhere")
    if m0.min_value() <= 0.0:
        raise DomainError("m0 must be positive everywhere")

    grid = eta.grid
    dt = eta.dt
    nt = len(eta.times)
    shift = int(round(params.h / dt))
    kernel = symmetric_time_kernel(dt, params.lam)
    taps = kernel.tap_radius
    if shift < 1 or taps >= shift:
        raise ParameterError(
            "time grid does not resolve the shift/width combination: "
            f"h={params.h} is {shift} steps, lam={params.lam} spans {taps} taps"
        )
    pad = shift + taps
    weights = kernel.samples * dt

    def time_smooth(diff_rows: np.ndarray, center: int) -> np.ndarray:
        """Convolve rows in time; output node i reads rows center+i-j, |j|<=taps."""
        out = np.zeros((nt,) + grid.shape)
        for idx, j in enumerate(range(-taps, taps + 1)):
            out += weights[idx] * diff_rows[center - j : center - j + nt]
        return out

    # eta: rows r = 0..pad+nt-1 of the extension hold times t0 + (r - pad)*dt.
    # After the forward shift by `shift` steps, the kernel window for output
    # node i covers extension rows i..i+2*taps (pad - taps - shift = 0).
    eta_ext = np.concatenate(
        [np.broadcast_to(m0.values, (pad,) + grid.shape), eta.values], axis=0
    )
    eta_window = eta_ext[0 : nt + 2 * taps]
    eta_smooth = time_smooth(eta_window - m0.values, center=taps)
    for i in range(nt):
        eta_smooth[i] = _convolve_spatial(grid, eta_smooth[i], params.lam, 1)
    eta_out = eta_smooth + m0.values

    # v: rows r = 0..nt+pad-1 hold times t0 + r*dt; backward shift then window
    v_ext = np.concatenate(
        [v.values, np.broadcast_to(uT.values, (pad,) + grid.shape)], axis=0
    )
    v_window = v_ext[shift - taps : shift - taps + nt + 2 * taps]
    v_smooth = time_smooth(v_window - uT.values, center=taps)
    for i in range(nt):
        v_smooth[i] = _convolve_spatial(grid, v_smooth[i], params.lam, 1)
    v_out = v_smooth + uT.values

    floor = 0.5 * min(eta.values.min(), m0.min_value())
    if eta_out.min() < floor:
        raise DomainError(
            f"smoothed density dipped to {eta_out.min():g}, below the guaranteed floor {floor:g}"
        )
    return (
        SpaceTimeField(grid, eta.times, eta_out),
        SpaceTimeField(grid, v.times, v_out),
    )
