"""Error taxonomy shared across the laboratory.

All errors are ValueError subclasses so call sites can catch broadly;
the distinct classes let the CLI map failures onto exit codes.
"""

from __future__ import annotations


class ConfigurationError(ValueError):
    """A run/experiment description is malformed or inconsistent."""


class ParameterError(ValueError):
    """A numerical parameter is outside its admissible range."""


class DomainError(ValueError):
    """A field value violates a pointwise admissibility requirement (e.g. positivity)."""


class ResolutionError(ValueError):
    """The requested operation cannot be represented at this grid resolution."""


class FieldFormatError(ValueError):
    """A persisted field file is malformed."""


class SolverFailure(RuntimeError):
    """Raised internally when a solve cannot continue; reported, not propagated, by drivers."""
