"""Numerical laboratory for second-order monotone mean-field games on the periodic torus."""

from .errors import (
    ConfigurationError,
    DomainError,
    FieldFormatError,
    ParameterError,
    ResolutionError,
    SolverFailure,
)
from .torus import (
    Grid,
    PeriodicField,
    SpaceTimeField,
    VectorField,
    constant_field,
    divergence,
    gradient,
    h1_norm,
    integrate,
    laplacian_power,
    make_grid,
    nodes,
)
from .solver import (
    ContinuationResult,
    RegularizationParams,
    SolverReport,
    StationaryProblem,
    beta_sigma,
    beta_sigma_prime,
    default_regularization,
    newton_solve,
    sigma_continuation,
)

__all__ = [
    "ConfigurationError",
    "DomainError",
    "FieldFormatError",
    "ParameterError",
    "ResolutionError",
    "SolverFailure",
    "Grid",
    "PeriodicField",
    "SpaceTimeField",
    "VectorField",
    "constant_field",
    "divergence",
    "gradient",
    "h1_norm",
    "integrate",
    "laplacian_power",
    "make_grid",
    "nodes",
    "ContinuationResult",
    "RegularizationParams",
    "SolverReport",
    "StationaryProblem",
    "beta_sigma",
    "beta_sigma_prime",
    "default_regularization",
    "newton_solve",
    "sigma_continuation",
]

__version__ = "0.1.0"
