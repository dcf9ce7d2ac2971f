"""Newton continuation for the regularized stationary system.

The unknown pair (density m, value u) solves, for a smoothing weight
``sigma``, a smoothing order ``k``, and a penalty exponent ``q``:

* value row:   ``-u + div(a grad u) - b.grad u - |grad u|^2/2 - V
  + sigma*(m + lap^{2k} m) + beta(m) + log m = 0``
* density row: ``m - div(a grad m) - div(m b) - div(m grad u)
  + sigma*(u + lap^{2k} u) - 1 = 0``

``beta`` is a one-sided barrier supported on (0, sigma] that blows up like
``-s**(-q)`` at zero; it vanishes identically once the density clears sigma.

Numerical core: the high-order smoothing term has a Fourier symbol of order
``(4 pi^2 |xi|^2)^{2k}`` — about 1e31 at moderate grids — so the Newton state
is kept as full-FFT *coefficients* and the stiff diagonal acts on stored
coefficients exactly.  Physical space is only visited for the nonlinear,
variable-coefficient terms, whose roundtrip error is benign.  The linear
stages solve the *right*-preconditioned system ``(J M^{-1}) y = -r`` with a
frozen-coefficient 2x2 per-mode block preconditioner; right preconditioning
keeps Krylov roundoff out of the tiny stiff coordinates.  Updates are
re-symmetrized algebraically (never through a physical roundtrip, which would
destroy coordinates far below the roundoff of order-one fields).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse.linalg as spla

from .errors import (
    ConfigurationError,
    DomainError,
    ParameterError,
    ResolutionError,
)
from .torus import (
    Grid,
    PeriodicField,
    VectorField,
    integrate,
    integrate_values,
    spectral_tables,
)
from .operators import _band_limited

__all__ = [
    "RegularizationParams",
    "default_regularization",
    "beta_sigma",
    "beta_sigma_prime",
    "StationaryProblem",
    "SolverReport",
    "newton_solve",
    "ContinuationResult",
    "sigma_continuation",
    "jacobian_fd_audit",
    "PositivityAuditReport",
    "jacobian_positivity_audit",
]

_TWO_PI = 2.0 * math.pi
_MIN_STEP = 2.0**-20
_LOG_FLOAT_MAX = math.log(np.finfo(np.float64).max)


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegularizationParams:
    """Smoothing weight, smoothing order, and barrier exponent."""

    sigma: float
    smoothing_order: int
    penalty_exponent: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma) and self.sigma >= 0.0):
            raise ParameterError(f"sigma must be finite and >= 0, got {self.sigma}")
        if not isinstance(self.smoothing_order, int) or self.smoothing_order < 1:
            raise ParameterError(
                f"smoothing order must be an integer >= 1, got {self.smoothing_order}"
            )
        if not self.penalty_exponent > 0.0:
            raise ParameterError(
                f"penalty exponent must be positive, got {self.penalty_exponent}"
            )

    def validate_for_grid(self, grid: Grid) -> None:
        """The smoothing order must dominate the dimension for the estimates
        to close: 2k - 4 > d/2 + 1; the barrier exponent must exceed d."""
        k, d = self.smoothing_order, grid.d
        if not (2 * k - 4 > d / 2 + 1):
            raise ConfigurationError(
                f"smoothing order {k} too low in dimension {d}: need 2k-4 > d/2+1"
            )
        if not self.penalty_exponent > d:
            raise ConfigurationError(
                f"penalty exponent {self.penalty_exponent} must exceed the dimension {d}"
            )


def default_regularization(grid: Grid, sigma: float) -> RegularizationParams:
    """Smallest admissible smoothing order for the grid dimension."""
    order = 3 if grid.d == 1 else 4
    return RegularizationParams(sigma, order, float(grid.d + 1))


# ---------------------------------------------------------------------------
# the density barrier
# ---------------------------------------------------------------------------


def _smoothstep(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, strictly increasing between."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        g = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        g1 = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return g / (g + g1)


def _smoothstep_prime(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    inside = (t > 0.0) & (t < 1.0)
    out = np.zeros_like(t)
    ts = np.where(inside, t, 0.5)
    g = np.exp(-1.0 / ts)
    g1 = np.exp(-1.0 / (1.0 - ts))
    dg = g / ts**2
    dg1 = g1 / (1.0 - ts) ** 2
    val = (dg * g1 + g * dg1) / (g + g1) ** 2
    out[inside] = val[inside]
    return out


def _barrier_inputs(s, sigma: float, q: float) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(s, dtype=np.float64)
    if np.min(arr) <= 0.0:
        raise DomainError("barrier is only defined for strictly positive arguments")
    if sigma < 0.0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    if q <= 0.0:
        raise ParameterError(f"penalty exponent must be positive, got {q}")
    return arr, sigma == 0.0


def beta_sigma(s, sigma: float, q: float) -> np.ndarray:
    """One-sided barrier: ``-s**(-q)`` below sigma/2, 0 above sigma, blended."""
    arr, off = _barrier_inputs(s, sigma, q)
    if off:
        return np.zeros_like(arr)
    w = (sigma - arr) / (sigma / 2.0)
    return -(arr**-q) * _smoothstep(w)


def beta_sigma_prime(s, sigma: float, q: float) -> np.ndarray:
    """Derivative of the barrier; nonnegative everywhere on its domain."""
    arr, off = _barrier_inputs(s, sigma, q)
    if off:
        return np.zeros_like(arr)
    w = (sigma - arr) / (sigma / 2.0)
    return q * arr ** (-q - 1.0) * _smoothstep(w) + (2.0 / sigma) * arr**-q * (
        _smoothstep_prime(w)
    )


# ---------------------------------------------------------------------------
# problem data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StationaryProblem:
    """Diffusion, drift, and potential coefficients on one grid."""

    diffusion: PeriodicField
    drift: VectorField
    potential: PeriodicField

    def __post_init__(self) -> None:
        if (
            self.diffusion.grid != self.drift.grid
            or self.diffusion.grid != self.potential.grid
        ):
            raise ConfigurationError("coefficient fields live on different grids")
        if self.diffusion.min_value() <= 0.0:
            raise DomainError("diffusion coefficient must be strictly positive")

    @property
    def grid(self) -> Grid:
        return self.diffusion.grid


@lru_cache(maxsize=None)
def _stiff_tables(grid: Grid, order: int):
    """Full-FFT multiplier tables: first derivatives, Laplacian symbol,
    its k-th power, and the smoothing symbol 1 + L^{2k}."""
    tab = spectral_tables(grid)
    lap = _TWO_PI**2 * tab.xi_sq_f
    top = _TWO_PI**2 * tab.max_xi_sq
    if 2 * order * math.log(max(top, 1.0)) > _LOG_FLOAT_MAX:
        raise ResolutionError(
            f"smoothing order {order} overflows float64 at n={grid.n}"
        )
    lap_k = lap**order
    smooth = 1.0 + lap ** (2 * order)
    return tab.ik_f, lap, lap_k, smooth


def _hermitian(z: np.ndarray) -> np.ndarray:
    """Algebraic Hermitian symmetrization: (z + conj(z at -index)) / 2."""
    flipped = z
    for ax in range(z.ndim):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    return 0.5 * (z + np.conj(flipped))


def _initial_state(grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    m_hat = np.zeros(grid.shape, dtype=np.complex128)
    m_hat[(0,) * grid.d] = float(grid.size)
    u_hat = np.zeros(grid.shape, dtype=np.complex128)
    return m_hat, u_hat


def _residual_hat(
    problem: StationaryProblem,
    params: RegularizationParams,
    m_hat: np.ndarray,
    u_hat: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    grid = problem.grid
    ik, _, _, smooth = _stiff_tables(grid, params.smoothing_order)
    sigma, q = params.sigma, params.penalty_exponent
    a = problem.diffusion.values
    b = problem.drift.values
    V = problem.potential.values

    m = np.fft.ifftn(m_hat).real
    if np.min(m) <= 0.0:
        raise DomainError("residual evaluated at a nonpositive density")
    u = np.fft.ifftn(u_hat).real
    du = [np.fft.ifftn(ik[j] * u_hat).real for j in range(grid.d)]
    dm = [np.fft.ifftn(ik[j] * m_hat).real for j in range(grid.d)]

    kinetic = 0.5 * sum(g * g for g in du)
    drift_term = sum(b[j] * du[j] for j in range(grid.d))
    soft1 = -u - drift_term - kinetic - V + beta_sigma(m, sigma, q) + np.log(m)
    r1 = np.fft.fftn(soft1) + sigma * smooth * m_hat
    for j in range(grid.d):
        r1 += ik[j] * np.fft.fftn(a * du[j])

    r2 = np.fft.fftn(m - 1.0) + sigma * smooth * u_hat
    for j in range(grid.d):
        flux = a * dm[j] + m * (b[j] + du[j])
        r2 -= ik[j] * np.fft.fftn(flux)
    return r1, r2


@dataclass(frozen=True)
class _Linearization:
    """Base-point data the Jacobian action needs (all physical-space, real)."""

    density: np.ndarray
    grad_value: Tuple[np.ndarray, ...]
    zero_order: np.ndarray  # 1/m + beta'(m)


def _linearize(
    problem: StationaryProblem,
    params: RegularizationParams,
    m_hat: np.ndarray,
    u_hat: np.ndarray,
) -> _Linearization:
    grid = problem.grid
    ik, _, _, _ = _stiff_tables(grid, params.smoothing_order)
    m = np.fft.ifftn(m_hat).real
    du = tuple(np.fft.ifftn(ik[j] * u_hat).real for j in range(grid.d))
    zero_order = 1.0 / m + beta_sigma_prime(
        m, params.sigma, params.penalty_exponent
    )
    return _Linearization(density=m, grad_value=du, zero_order=zero_order)


def _jacobian_apply(
    problem: StationaryProblem,
    params: RegularizationParams,
    lin: _Linearization,
    dm_hat: np.ndarray,
    du_hat: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Complex-linear Jacobian action in coefficient space (no real parts)."""
    grid = problem.grid
    ik, _, _, smooth = _stiff_tables(grid, params.smoothing_order)
    sigma = params.sigma
    a = problem.diffusion.values
    b = problem.drift.values

    dm = np.fft.ifftn(dm_hat)
    ddu = [np.fft.ifftn(ik[j] * du_hat) for j in range(grid.d)]
    ddm = [np.fft.ifftn(ik[j] * dm_hat) for j in range(grid.d)]

    transport = sum((b[j] + lin.grad_value[j]) * ddu[j] for j in range(grid.d))
    r1 = np.fft.fftn(lin.zero_order * dm - transport)
    r1 += sigma * smooth * dm_hat - du_hat
    for j in range(grid.d):
        r1 += ik[j] * np.fft.fftn(a * ddu[j])

    r2 = dm_hat + sigma * smooth * du_hat
    for j in range(grid.d):
        flux = a * ddm[j] + dm * (b[j] + lin.grad_value[j]) + lin.density * ddu[j]
        r2 -= ik[j] * np.fft.fftn(flux)
    return r1, r2


def _make_preconditioner(
    problem: StationaryProblem,
    params: RegularizationParams,
    density_mean: float,
):
    """Frozen-coefficient per-mode 2x2 blocks; exact on the stiff diagonal."""
    _, lap, _, smooth = _stiff_tables(problem.grid, params.smoothing_order)
    sigma = params.sigma
    a_mean = float(np.mean(problem.diffusion.values))
    slope = float(
        beta_sigma_prime(
            np.array([density_mean]), sigma, params.penalty_exponent
        )[0]
    )
    p = 1.0 / density_mean + slope + sigma * smooth
    c = 1.0 + a_mean * lap
    s = density_mean * lap + sigma * smooth
    det = p * s + c * c  # >= c^2 >= 1: always invertible

    def apply_inverse(y1: np.ndarray, y2: np.ndarray):
        return (s * y1 + c * y2) / det, (-c * y1 + p * y2) / det

    return apply_inverse


def _solve_newton_step(
    problem: StationaryProblem,
    params: RegularizationParams,
    lin: _Linearization,
    r1: np.ndarray,
    r2: np.ndarray,
    linear_solver: str,
    gmres_rtol: float,
) -> Tuple[np.ndarray, np.ndarray]:
    grid = problem.grid
    size = grid.size
    shape = grid.shape
    apply_inverse = _make_preconditioner(problem, params, float(np.mean(lin.density)))

    def preconditioned_action(y: np.ndarray) -> np.ndarray:
        y1 = y[:size].reshape(shape)
        y2 = y[size:].reshape(shape)
        d1, d2 = apply_inverse(y1, y2)
        o1, o2 = _jacobian_apply(problem, params, lin, d1, d2)
        return np.concatenate([o1.ravel(), o2.ravel()])

    rhs = -np.concatenate([r1.ravel(), r2.ravel()])

    if linear_solver == "dense":
        if grid.d != 1 or grid.n > 64:
            raise ConfigurationError(
                "dense linear solver is an audit path for 1-D grids with n <= 64"
            )
        basis = np.eye(2 * size, dtype=np.complex128)
        matrix = np.column_stack(
            [preconditioned_action(basis[:, i]) for i in range(2 * size)]
        )
        y = np.linalg.solve(matrix, rhs)
    else:
        op = spla.LinearOperator(
            (2 * size, 2 * size),
            matvec=preconditioned_action,
            dtype=np.complex128,
        )
        # an unconverged Krylov solve still yields a usable descent candidate;
        # the damped line search downstream decides whether to accept it
        y, _ = spla.gmres(op, rhs, rtol=gmres_rtol, atol=0.0, restart=60, maxiter=50)

    d1, d2 = apply_inverse(y[:size].reshape(shape), y[size:].reshape(shape))
    return _hermitian(d1), _hermitian(d2)


# ---------------------------------------------------------------------------
# Newton iteration and continuation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverReport:
    """Outcome of one Newton solve; failures are reported, not raised."""

    sigma: float
    converged: bool
    iterations: int
    residual_history: Tuple[float, ...]
    step_sizes: Tuple[float, ...]
    positivity_margin: float
    mass_residual: float
    message: str
    density: PeriodicField
    value: PeriodicField
    state_hat: Tuple[np.ndarray, np.ndarray] = field(repr=False)


def _finish_report(
    problem: StationaryProblem,
    params: RegularizationParams,
    m_hat: np.ndarray,
    u_hat: np.ndarray,
    converged: bool,
    history: Sequence[float],
    steps: Sequence[float],
    message: str,
) -> SolverReport:
    grid = problem.grid
    m = np.fft.ifftn(m_hat).real
    u = np.fft.ifftn(u_hat).real
    margin = float(np.min(m))
    density = PeriodicField(grid, m, is_density=margin > 0.0)
    value = PeriodicField(grid, u)
    mass = integrate(density) + params.sigma * integrate(value) - 1.0
    return SolverReport(
        sigma=params.sigma,
        converged=converged,
        iterations=len(steps),
        residual_history=tuple(history),
        step_sizes=tuple(steps),
        positivity_margin=margin,
        mass_residual=abs(mass),
        message=message,
        density=density,
        value=value,
        state_hat=(m_hat, u_hat),
    )


def _residual_sup(grid: Grid, r1: np.ndarray, r2: np.ndarray) -> float:
    p1 = np.fft.ifftn(r1).real
    p2 = np.fft.ifftn(r2).real
    return float(max(np.max(np.abs(p1)), np.max(np.abs(p2))))


def newton_solve(
    problem: StationaryProblem,
    params: RegularizationParams,
    *,
    initial: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    tol: float = 1e-11,
    max_iter: int = 40,
    linear_solver: str = "gmres",
    gmres_rtol: float = 1e-10,
) -> SolverReport:
    """Damped Newton iteration from the flat state (density 1, value 0).

    The step is shrunk first to keep the density positive, then halved until
    the sup-norm residual decreases (floor 2^-20); either failure ends the
    solve with ``converged=False`` and an explanatory message.
    """
    if not (math.isfinite(tol) and tol > 0.0):
        raise ParameterError(f"tolerance must be positive, got {tol}")
    if max_iter < 1:
        raise ParameterError(f"max_iter must be >= 1, got {max_iter}")
    if linear_solver not in ("gmres", "dense"):
        raise ConfigurationError(f"unknown linear solver {linear_solver!r}")
    params.validate_for_grid(problem.grid)

    grid = problem.grid
    if initial is None:
        m_hat, u_hat = _initial_state(grid)
    else:
        m_hat, u_hat = initial
        if m_hat.shape != grid.shape or u_hat.shape != grid.shape:
            raise ConfigurationError("initial state shape does not match the grid")
        m_hat = _hermitian(np.asarray(m_hat, dtype=np.complex128))
        u_hat = _hermitian(np.asarray(u_hat, dtype=np.complex128))
        if np.min(np.fft.ifftn(m_hat).real) <= 0.0:
            raise DomainError("initial density must be strictly positive")

    history = []
    steps = []
    for _ in range(max_iter):
        r1, r2 = _residual_hat(problem, params, m_hat, u_hat)
        sup = _residual_sup(grid, r1, r2)
        history.append(sup)
        if sup <= tol:
            return _finish_report(
                problem, params, m_hat, u_hat, True, history, steps, "converged"
            )

        lin = _linearize(problem, params, m_hat, u_hat)
        dm_hat, du_hat = _solve_newton_step(
            problem, params, lin, r1, r2, linear_solver, gmres_rtol
        )

        t = 1.0
        accepted = False
        while t >= _MIN_STEP:
            m_try = m_hat + t * dm_hat
            u_try = u_hat + t * du_hat
            if np.min(np.fft.ifftn(m_try).real) <= 0.0:
                t *= 0.5
                continue
            r1_try, r2_try = _residual_hat(problem, params, m_try, u_try)
            if _residual_sup(grid, r1_try, r2_try) <= (1.0 - 1e-4 * t) * sup:
                m_hat = _hermitian(m_try)
                u_hat = _hermitian(u_try)
                steps.append(t)
                accepted = True
                break
            t *= 0.5
        if not accepted:
            return _finish_report(
                problem,
                params,
                m_hat,
                u_hat,
                False,
                history,
                steps,
                "line search stalled: no positive-density step reduced the residual",
            )

    r1, r2 = _residual_hat(problem, params, m_hat, u_hat)
    history.append(_residual_sup(grid, r1, r2))
    converged = history[-1] <= tol
    message = "converged" if converged else "iteration budget exhausted"
    return _finish_report(
        problem, params, m_hat, u_hat, converged, history, steps, message
    )


@dataclass(frozen=True)
class ContinuationResult:
    reports: Tuple[SolverReport, ...]
    success: bool

    @property
    def sigmas(self) -> Tuple[float, ...]:
        return tuple(r.sigma for r in self.reports)

    @property
    def final(self) -> SolverReport:
        return self.reports[-1]


def sigma_continuation(
    problem: StationaryProblem,
    schedule: Sequence[float],
    *,
    smoothing_order: Optional[int] = None,
    penalty_exponent: Optional[float] = None,
    tol: float = 1e-11,
    max_iter: int = 40,
    linear_solver: str = "gmres",
    initial: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> ContinuationResult:
    """Solve along a strictly decreasing smoothing schedule with warm starts.

    Stops at the first failed stage and returns the partial stage reports
    with ``success=False``.
    """
    sigmas = tuple(float(s) for s in schedule)
    if len(sigmas) == 0:
        raise ConfigurationError("schedule must contain at least one stage")
    if any(not (math.isfinite(s) and s > 0.0) for s in sigmas):
        raise ConfigurationError("schedule entries must be finite and positive")
    if any(b >= a for a, b in zip(sigmas, sigmas[1:])):
        raise ConfigurationError("schedule must be strictly decreasing")

    order = smoothing_order
    if order is None:
        order = default_regularization(problem.grid, sigmas[0]).smoothing_order
    q = penalty_exponent
    if q is None:
        q = float(problem.grid.d + 1)

    reports = []
    state = initial
    for sigma in sigmas:
        params = RegularizationParams(sigma, order, q)
        report = newton_solve(
            problem,
            params,
            initial=state,
            tol=tol,
            max_iter=max_iter,
            linear_solver=linear_solver,
        )
        reports.append(report)
        if not report.converged:
            return ContinuationResult(tuple(reports), False)
        state = report.state_hat
    return ContinuationResult(tuple(reports), True)


# ---------------------------------------------------------------------------
# audits
# ---------------------------------------------------------------------------


def _band_mask(grid: Grid, max_mode: int) -> np.ndarray:
    freqs = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
    mask = np.ones(grid.shape, dtype=bool)
    for ax in range(grid.d):
        view = [1] * grid.d
        view[ax] = grid.n
        mask &= np.abs(freqs.reshape(view)) <= max_mode
    return mask


def _band_state(
    grid: Grid, rng: np.random.Generator, max_mode: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded positive-density state whose coefficients vanish exactly
    outside the band: the stiff term then differences exactly in the audits."""
    mask = _band_mask(grid, max_mode)
    m = 1.0 + _band_limited(grid, rng, max_mode=max_mode, scale=0.06)
    u = _band_limited(grid, rng, max_mode=max_mode, scale=0.1)
    m_hat = np.fft.fftn(m)
    u_hat = np.fft.fftn(u)
    m_hat[~mask] = 0.0
    u_hat[~mask] = 0.0
    m_hat = _hermitian(m_hat)
    u_hat = _hermitian(u_hat)
    if np.min(np.fft.ifftn(m_hat).real) <= 0.0:
        raise DomainError("sampled band-limited density lost positivity")
    return m_hat, u_hat


def _band_direction(
    grid: Grid, rng: np.random.Generator, max_mode: int
) -> Tuple[np.ndarray, np.ndarray]:
    mask = _band_mask(grid, max_mode)
    dm = _band_limited(grid, rng, max_mode=max_mode, scale=0.2) + rng.normal(0.0, 0.2)
    du = _band_limited(grid, rng, max_mode=max_mode, scale=0.2) + rng.normal(0.0, 0.2)
    dm_hat = np.fft.fftn(dm)
    du_hat = np.fft.fftn(du)
    dm_hat[~mask] = 0.0
    du_hat[~mask] = 0.0
    return _hermitian(dm_hat), _hermitian(du_hat)


def jacobian_fd_audit(
    problem: StationaryProblem,
    params: RegularizationParams,
    *,
    seed: int = 0,
    step: float = 1e-5,
    max_mode: int = 3,
    samples: int = 3,
) -> float:
    """Max relative mismatch between the Jacobian action and central
    differences of the residual, over seeded band-limited states."""
    if not (1e-7 <= step <= 1e-3):
        raise ParameterError(f"step must lie in [1e-7, 1e-3], got {step}")
    params.validate_for_grid(problem.grid)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        m_hat, u_hat = _band_state(problem.grid, rng, max_mode)
        dm_hat, du_hat = _band_direction(problem.grid, rng, max_mode)
        lin = _linearize(problem, params, m_hat, u_hat)
        j1, j2 = _jacobian_apply(problem, params, lin, dm_hat, du_hat)
        p1, p2 = _residual_hat(
            problem, params, m_hat + step * dm_hat, u_hat + step * du_hat
        )
        n1, n2 = _residual_hat(
            problem, params, m_hat - step * dm_hat, u_hat - step * du_hat
        )
        for fd, jac in (((p1 - n1) / (2 * step), j1), ((p2 - n2) / (2 * step), j2)):
            scale = float(np.max(np.abs(jac))) + 1.0
            worst = max(worst, float(np.max(np.abs(fd - jac))) / scale)
    return worst


@dataclass(frozen=True)
class PositivityAuditReport:
    samples: int
    seed: int
    max_relative_mismatch: float
    min_quadratic_form: float


def jacobian_positivity_audit(
    problem: StationaryProblem,
    params: RegularizationParams,
    *,
    seed: int = 0,
    samples: int = 5,
    max_mode: int = 3,
) -> PositivityAuditReport:
    """Verify the linearization's quadratic form splits into the monotone
    bulk plus the smoothing contribution:

    ``<J w, w> = int (1/m + beta') wm^2 + int m |grad wu|^2
    + sigma (||wm||^2 + ||lap^k wm||^2 + ||wu||^2 + ||lap^k wu||^2)``

    computed entirely in coefficient space so the stiff part is exact.
    """
    params.validate_for_grid(problem.grid)
    grid = problem.grid
    ik, _, lap_k, _ = _stiff_tables(grid, params.smoothing_order)
    size2 = float(grid.size) ** 2
    rng = np.random.default_rng(seed)
    worst = 0.0
    min_form = math.inf
    for _ in range(samples):
        m_hat, u_hat = _band_state(grid, rng, max_mode)
        dm_hat, du_hat = _band_direction(grid, rng, max_mode)
        lin = _linearize(problem, params, m_hat, u_hat)
        j1, j2 = _jacobian_apply(problem, params, lin, dm_hat, du_hat)
        form = float(
            np.sum(j1 * np.conj(dm_hat) + j2 * np.conj(du_hat)).real / size2
        )
        dm = np.fft.ifftn(dm_hat).real
        grad_sq = np.zeros(grid.shape)
        for j in range(grid.d):
            g = np.fft.ifftn(ik[j] * du_hat).real
            grad_sq += g * g
        bulk = integrate_values(grid, lin.zero_order * dm * dm)
        bulk += integrate_values(grid, lin.density * grad_sq)
        stiff = params.sigma * float(
            np.sum(
                (1.0 + lap_k**2) * (np.abs(dm_hat) ** 2 + np.abs(du_hat) ** 2)
            )
            / size2
        )
        oracle = bulk + stiff
        worst = max(worst, abs(form - oracle) / (abs(oracle) + 1.0))
        min_form = min(min_form, form)
    return PositivityAuditReport(
        samples=samples,
        seed=seed,
        max_relative_mismatch=worst,
        min_quadratic_form=min_form,
    )
