"""Hamiltonian families and structural checks.

Three concrete families are provided:

* ``PowerHamiltonian`` — isotropic kinetic part with a local power coupling,
  ``H(p, m) = (1 + |p|^2)^(g/2) / g - m^c``.
* ``CongestionHamiltonian`` — kinetic part damped by the local density,
  ``H(p, m) = (1 + |p|^2)^(g/2) / (g * m^a)``.
* ``QuadraticLogHamiltonian`` — quadratic kinetic part with a drift, a
  potential, and a logarithmic coupling,
  ``H(x, p, m) = |p|^2/2 + c(x).p + V(x) - log m``.

Each family evaluates pointwise values together with first and second
derivatives in the momentum and density slots, which is what the operator
assembly and the monotonicity audits consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .errors import ConfigurationError, DomainError, ParameterError
from .torus import PeriodicField, VectorField, gradient

__all__ = [
    "HamiltonianValues",
    "PowerHamiltonian",
    "CongestionHamiltonian",
    "QuadraticLogHamiltonian",
    "Hamiltonian",
    "monotonicity_matrix",
    "MonotonicityReport",
    "sample_monotonicity",
    "verify_derivative_consistency",
    "ExponentProfile",
    "check_exponent_profile",
]


@dataclass(frozen=True)
class HamiltonianValues:
    """Pointwise evaluation bundle.

    ``value`` and ``grad_m`` share the shape of the density array; ``grad_p``
    and ``cross_pm`` carry a leading component axis; ``hess_pp`` carries two.
    """

    value: np.ndarray
    grad_p: np.ndarray
    hess_pp: np.ndarray
    grad_m: np.ndarray
    cross_pm: np.ndarray


def _as_momentum(p: Union[np.ndarray, VectorField]) -> np.ndarray:
    if isinstance(p, VectorField):
        return p.values
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim < 1:
        raise ConfigurationError("momentum needs a leading component axis")
    return arr


def _as_density(m: Union[np.ndarray, PeriodicField, float]) -> np.ndarray:
    if isinstance(m, PeriodicField):
        return m.values
    return np.asarray(m, dtype=np.float64)


def _identity_blocks(dim: int, shape: Tuple[int, ...]) -> np.ndarray:
    out = np.zeros((dim, dim) + shape)
    for i in range(dim):
        out[i, i] = 1.0
    return out


@dataclass(frozen=True)
class PowerHamiltonian:
    """Kinetic growth exponent ``gamma`` and local coupling ``-m**coupling``."""

    gamma: float
    coupling: float = 1.0

    def __post_init__(self) -> None:
        if not self.gamma > 1.0:
            raise ParameterError(f"gamma must exceed 1, got {self.gamma}")
        if not self.coupling > 0.0:
            raise ParameterError(f"coupling must be positive, got {self.coupling}")

    def _check_density(self, m: np.ndarray) -> None:
        if np.min(m) < 0.0:
            raise DomainError("power family needs a nonnegative density")

    def curvature(self, p, m) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        p = _as_momentum(p)
        m = _as_density(m)
        self._check_density(m)
        g = self.gamma
        e = 1.0 + np.sum(p * p, axis=0)
        hess = (g - 2.0) * e ** (g / 2.0 - 2.0) * (p[:, None] * p[None, :])
        hess += e ** (g / 2.0 - 1.0) * _identity_blocks(p.shape[0], e.shape)
        cross = np.zeros_like(p)
        grad_m = -self.coupling * m ** (self.coupling - 1.0)
        return hess, cross, np.broadcast_to(grad_m, e.shape).copy()

    def evaluate(self, p, m) -> HamiltonianValues:
        p = _as_momentum(p)
        m = _as_density(m)
        self._check_density(m)
        g = self.gamma
        e = 1.0 + np.sum(p * p, axis=0)
        value = e ** (g / 2.0) / g - m**self.coupling
        grad_p = e ** (g / 2.0 - 1.0) * p
        hess, cross, grad_m = self.curvature(p, m)
        return HamiltonianValues(value, grad_p, hess, grad_m, cross)


@dataclass(frozen=True)
class CongestionHamiltonian:
    """Kinetic part divided by ``m**alpha``; defined for positive density."""

    gamma: float
    alpha: float

    def __post_init__(self) -> None:
        if not self.gamma > 1.0:
            raise ParameterError(f"gamma must exceed 1, got {self.gamma}")
        if not self.alpha > 0.0:
            raise ParameterError(f"alpha must be positive, got {self.alpha}")

    def _check_density(self, m: np.ndarray) -> None:
        if np.min(m) <= 0.0:
            raise DomainError("congestion family needs a strictly positive density")

    def curvature(self, p, m) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        p = _as_momentum(p)
        m = _as_density(m)
        self._check_density(m)
        g, a = self.gamma, self.alpha
        e = 1.0 + np.sum(p * p, axis=0)
        damp = m**-a
        hess = (g - 2.0) * e ** (g / 2.0 - 2.0) * (p[:, None] * p[None, :])
        hess += e ** (g / 2.0 - 1.0) * _identity_blocks(p.shape[0], e.shape)
        hess = hess * damp
        cross = -a * e ** (g / 2.0 - 1.0) * p * m ** -(a + 1.0)
        grad_m = -a * e ** (g / 2.0) / g * m ** -(a + 1.0)
        return hess, cross, grad_m

    def evaluate(self, p, m) -> HamiltonianValues:
        p = _as_momentum(p)
        m = _as_density(m)
        self._check_density(m)
        g, a = self.gamma, self.alpha
        e = 1.0 + np.sum(p * p, axis=0)
        value = e ** (g / 2.0) / g * m**-a
        grad_p = e ** (g / 2.0 - 1.0) * p * m**-a
        hess, cross, grad_m = self.curvature(p, m)
        return HamiltonianValues(value, grad_p, hess, grad_m, cross)


@dataclass(frozen=True)
class QuadraticLogHamiltonian:
    """Quadratic kinetic part, position-dependent drift, log coupling.

    ``effective_drift`` already absorbs the diffusion-gradient correction, so
    the evaluated gradient in momentum is ``p + effective_drift``.  Use
    :meth:`from_coefficients` to build it from raw diffusion/drift fields.
    """

    effective_drift: VectorField
    potential: PeriodicField

    def __post_init__(self) -> None:
        if self.effective_drift.grid != self.potential.grid:
            raise ConfigurationError("drift and potential live on different grids")

    @classmethod
    def from_coefficients(
        cls,
        diffusion: PeriodicField,
        drift: VectorField,
        potential: PeriodicField,
    ) -> "QuadraticLogHamiltonian":
        if diffusion.grid != drift.grid or diffusion.grid != potential.grid:
            raise ConfigurationError("coefficient fields live on different grids")
        da = gradient(diffusion)
        effective = VectorField(drift.grid, drift.values - da.values)
        return cls(effective, potential)

    @property
    def grid(self):
        return self.potential.grid

    def _check_density(self, m: np.ndarray) -> None:
        if np.min(m) <= 0.0:
            raise DomainError("log coupling needs a strictly positive density")

    def curvature(self, p, m) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        p = _as_momentum(p)
        m = _as_density(m)
        self._check_density(m)
        shape = np.broadcast_shapes(p.shape[1:], m.shape)
        hess = _identity_blocks(p.shape[0], shape)
        cross = np.zeros((p.shape[0],) + shape)
        grad_m = -1.0 / np.broadcast_to(m, shape)
        return hess, cross, grad_m

    def evaluate(self, p, m) -> HamiltonianValues:
        p = _as_momentum(p)
        m = _as_density(m)
        self._check_density(m)
        grid = self.grid
        if p.shape != (grid.d,) + grid.shape:
            raise ConfigurationError(
                f"momentum shape {p.shape} does not match the model grid {grid.shape}"
            )
        c = self.effective_drift.values
        value = 0.5 * np.sum(p * p, axis=0) + np.sum(c * p, axis=0)
        value += self.potential.values - np.log(m)
        grad_p = p + c
        hess, cross, grad_m = self.curvature(p, m)
        return HamiltonianValues(value, grad_p, hess, grad_m, cross)


Hamiltonian = Union[PowerHamiltonian, CongestionHamiltonian, QuadraticLogHamiltonian]


# ---------------------------------------------------------------------------
# monotonicity
# ---------------------------------------------------------------------------


def _assemble_matrices(
    hess: np.ndarray, cross: np.ndarray, grad_m: np.ndarray, m: np.ndarray
) -> np.ndarray:
    """Stack the structure matrices for a batch; returns (*batch, dim+1, dim+1)."""
    dim = hess.shape[0]
    batch = grad_m.shape
    mats = np.zeros(batch + (dim + 1, dim + 1))
    mats[..., :dim, :dim] = np.moveaxis(m * hess, (0, 1), (-2, -1))
    off = np.moveaxis(0.5 * m * cross, 0, -1)
    mats[..., :dim, dim] = off
    mats[..., dim, :dim] = off
    mats[..., dim, dim] = -grad_m
    return mats


def monotonicity_matrix(model: Hamiltonian, p, m: float) -> np.ndarray:
    """Pointwise structure matrix whose positivity certifies monotonicity."""
    p = np.asarray(p, dtype=np.float64).reshape(-1, 1)
    m_arr = np.asarray([float(m)])
    hess, cross, grad_m = model.curvature(p, m_arr)
    return _assemble_matrices(hess, cross, grad_m, m_arr)[0]


@dataclass(frozen=True)
class MonotonicityReport:
    samples: int
    seed: int
    min_eigenvalue: float
    witness_momentum: Tuple[float, ...]
    witness_density: float

    @property
    def positive(self) -> bool:
        return self.min_eigenvalue > 0.0


def sample_monotonicity(
    model: Hamiltonian,
    dim: int,
    *,
    samples: int = 10_000,
    seed: int = 0,
    momentum_bound: float = 3.0,
    density_range: Tuple[float, float] = (0.1, 4.0),
) -> MonotonicityReport:
    """Smallest structure-matrix eigenvalue over a seeded sample cloud."""
    if dim < 1:
        raise ParameterError("dimension must be at least 1")
    if samples < 1:
        raise ParameterError("need at least one sample")
    lo, hi = density_range
    if not (0.0 < lo < hi):
        raise ParameterError(f"density range must satisfy 0 < lo < hi, got {density_range}")
    rng = np.random.default_rng(seed)
    p = rng.uniform(-momentum_bound, momentum_bound, size=(dim, samples))
    m = rng.uniform(lo, hi, size=samples)
    hess, cross, grad_m = model.curvature(p, m)
    mats = _assemble_matrices(hess, cross, grad_m, m)
    eigs = np.linalg.eigvalsh(mats)
    per_sample = eigs[:, 0]
    idx = int(np.argmin(per_sample))
    return MonotonicityReport(
        samples=samples,
        seed=seed,
        min_eigenvalue=float(per_sample[idx]),
        witness_momentum=tuple(float(v) for v in p[:, idx]),
        witness_density=float(m[idx]),
    )


# ---------------------------------------------------------------------------
# finite-difference consistency
# ---------------------------------------------------------------------------


def verify_derivative_consistency(
    model: Hamiltonian,
    dim: int,
    *,
    samples: int = 64,
    seed: int = 1,
    step: float = 1e-5,
    momentum_bound: float = 2.0,
    density_range: Tuple[float, float] = (0.25, 3.0),
) -> float:
    """Max relative mismatch between reported derivatives and central differences.

    Works on sample clouds for the translation-invariant families; the
    position-dependent family is probed through its curvature blocks plus a
    grid evaluation, both of which share the same code path.
    """
    if not (1e-7 <= step <= 1e-3):
        raise ParameterError(f"step must lie in [1e-7, 1e-3], got {step}")
    rng = np.random.default_rng(seed)

    if isinstance(model, QuadraticLogHamiltonian):
        grid = model.grid
        dim = grid.d
        p = rng.normal(0.0, momentum_bound / 2.0, size=(dim,) + grid.shape)
        m = rng.uniform(*density_range, size=grid.shape)
    else:
        p = rng.uniform(-momentum_bound, momentum_bound, size=(dim, samples))
        m = rng.uniform(*density_range, size=samples)

    def value(pv, mv):
        return model.evaluate(pv, mv).value

    def grad_p(pv, mv):
        return model.evaluate(pv, mv).grad_p

    vals = model.evaluate(p, m)
    worst = 0.0

    def record(fd: np.ndarray, analytic: np.ndarray) -> None:
        nonlocal worst
        scale = max(1.0, float(np.max(np.abs(analytic))))
        worst = max(worst, float(np.max(np.abs(fd - analytic))) / scale)

    for i in range(p.shape[0]):
        bump = np.zeros_like(p)
        bump[i] = step
        record((value(p + bump, m) - value(p - bump, m)) / (2 * step), vals.grad_p[i])
        record(
            (grad_p(p + bump, m) - grad_p(p - bump, m)) / (2 * step),
            vals.hess_pp[:, i],
        )
    record((value(p, m + step) - value(p, m - step)) / (2 * step), vals.grad_m)
    record((grad_p(p, m + step) - grad_p(p, m - step)) / (2 * step), vals.cross_pm)
    return worst


# ---------------------------------------------------------------------------
# integrability exponents
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentProfile:
    """Derived exponents and feasibility flags for a growth configuration."""

    conjugate_rate: float
    sobolev_conjugate: Optional[float]
    product_exponents: Tuple[
        Optional[float], Optional[float], Optional[float], Optional[float]
    ]
    growth_ordering_ok: bool
    integrability_ok: bool
    superquadratic_ok: bool
    defined_ok: bool

    @property
    def admissible(self) -> bool:
        return (
            self.growth_ordering_ok
            and self.integrability_ok
            and self.superquadratic_ok
            and self.defined_ok
        )


def check_exponent_profile(
    r_growth: float, r: float, gamma_growth: float, gamma: float, dim: int
) -> ExponentProfile:
    """Compute the pairing exponents implied by a coupling/kinetic growth pair.

    ``r_growth``/``gamma_growth`` bound the coupling and kinetic growth from
    above; ``r``/``gamma`` are the integrability rates actually available.
    A reciprocal-budget denominator that is not strictly positive makes the
    corresponding product exponent undefined.
    """
    if dim < 1 or int(dim) != dim:
        raise ParameterError(f"dimension must be a positive integer, got {dim}")
    for name, v in (("r", r), ("gamma", gamma)):
        if not (math.isfinite(v) and v > 1.0):
            raise ParameterError(f"{name} must be finite and exceed 1, got {v}")

    conjugate = r / (r - 1.0)
    sobolev = dim * gamma / (dim - gamma) if gamma < dim else None

    def reciprocal_budget(*shares: float) -> Optional[float]:
        den = 1.0 - math.fsum(shares)
        return 1.0 / den if den > 0.0 else None

    q = (
        reciprocal_budget(1.0 / r, 1.0 / gamma),
        reciprocal_budget(2.0 / r),
        reciprocal_budget(2.0 / r, 1.0 / gamma),
        reciprocal_budget(1.0 / r, 2.0 / gamma),
    )
    defined = all(v is not None for v in q)
    ordering = (r_growth >= r > 1.0) and (gamma_growth >= gamma > 1.0)
    # tiny relative slack so configurations sitting exactly on the embedding
    # threshold are not rejected by roundoff in r/(r-1)
    integrable = gamma >= dim or (
        sobolev is not None and conjugate <= sobolev * (1.0 + 1e-12)
    )
    superq = (2.0 / r + 1.0 / gamma < 1.0) and (1.0 / r + 2.0 / gamma < 1.0)
    return ExponentProfile(
        conjugate_rate=conjugate,
        sobolev_conjugate=sobolev,
        product_exponents=q,
        growth_ordering_ok=ordering,
        integrability_ok=integrable,
        superquadratic_ok=superq,
        defined_ok=defined,
    )
