"""Experiment configuration: YAML schema, validation, and problem assembly.

Coefficient fields are described by a constant plus a truncated list of
Fourier modes, so a config file pins the *exact* band-limited field the
solver sees — no resampling ambiguity between runs at different resolutions.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from .errors import ConfigurationError
from .solver import StationaryProblem
from .torus import Grid, PeriodicField, VectorField, make_grid, nodes

__all__ = [
    "FourierMode",
    "FieldSpec",
    "ModelSpec",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "realize_field",
    "realize_drift",
    "build_problem",
    "config_digest",
]


@dataclass(frozen=True)
class FourierMode:
    """One wavevector with cosine and sine amplitudes."""

    k: Tuple[int, ...]
    cos: float = 0.0
    sin: float = 0.0


@dataclass(frozen=True)
class FieldSpec:
    constant: float = 0.0
    modes: Tuple[FourierMode, ...] = ()


@dataclass(frozen=True)
class ModelSpec:
    """Hamiltonian family used by the structure audits."""

    family: str = "quadratic_log"
    gamma: float = 2.0
    alpha: float = 1.0
    coupling: float = 1.0

    def __post_init__(self) -> None:
        if self.family not in ("quadratic_log", "power", "congestion"):
            raise ConfigurationError(
                f"unknown model family {self.family!r}; expected quadratic_log, "
                "power, or congestion"
            )


@dataclass(frozen=True)
class ExperimentConfig:
    dimension: int
    points: int
    diffusion: FieldSpec
    drift: Tuple[FieldSpec, ...]
    potential: FieldSpec
    schedule: Tuple[float, ...]
    smoothing_order: Optional[int] = None
    penalty_exponent: Optional[float] = None
    tol: float = 1e-11
    max_iter: int = 40
    linear_solver: str = "gmres"
    seed: int = 0
    model: ModelSpec = ModelSpec()


def _require_mapping(obj, where: str) -> Mapping:
    if not isinstance(obj, Mapping):
        raise ConfigurationError(f"{where} must be a mapping, got {type(obj).__name__}")
    return obj


def _check_keys(obj: Mapping, allowed: Sequence[str], where: str) -> None:
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigurationError(f"unknown keys in {where}: {', '.join(unknown)}")


def _parse_mode(obj, dimension: int, where: str) -> FourierMode:
    entry = _require_mapping(obj, where)
    _check_keys(entry, ("k", "cos", "sin"), where)
    if "k" not in entry:
        raise ConfigurationError(f"{where} is missing the wavevector key 'k'")
    k = entry["k"]
    if not isinstance(k, Sequence) or isinstance(k, str):
        raise ConfigurationError(f"{where}: 'k' must be a list of integers")
    kt = tuple(k)
    if len(kt) != dimension or not all(isinstance(x, int) for x in kt):
        raise ConfigurationError(
            f"{where}: 'k' must hold {dimension} integer(s), got {k!r}"
        )
    return FourierMode(
        k=kt, cos=float(entry.get("cos", 0.0)), sin=float(entry.get("sin", 0.0))
    )


def _parse_field(obj, dimension: int, where: str) -> FieldSpec:
    entry = _require_mapping(obj, where)
    _check_keys(entry, ("constant", "modes"), where)
    raw_modes = entry.get("modes", ())
    if not isinstance(raw_modes, Sequence) or isinstance(raw_modes, str):
        raise ConfigurationError(f"{where}: 'modes' must be a list")
    modes = tuple(
        _parse_mode(m, dimension, f"{where}.modes[{i}]")
        for i, m in enumerate(raw_modes)
    )
    return FieldSpec(constant=float(entry.get("constant", 0.0)), modes=modes)


def parse_config(raw) -> ExperimentConfig:
    top = _require_mapping(raw, "config")
    _check_keys(
        top,
        (
            "grid",
            "coefficients",
            "schedule",
            "smoothing_order",
            "penalty_exponent",
            "solver",
            "seed",
            "model",
        ),
        "config",
    )
    for key in ("grid", "coefficients", "schedule"):
        if key not in top:
            raise ConfigurationError(f"config is missing the required key {key!r}")

    grid_entry = _require_mapping(top["grid"], "grid")
    _check_keys(grid_entry, ("dimension", "points"), "grid")
    try:
        dimension = int(grid_entry["dimension"])
        points = int(grid_entry["points"])
    except KeyError as missing:
        raise ConfigurationError(f"grid is missing the key {missing}") from None

    coeff = _require_mapping(top["coefficients"], "coefficients")
    _check_keys(coeff, ("diffusion", "drift", "potential"), "coefficients")
    for key in ("diffusion", "drift", "potential"):
        if key not in coeff:
            raise ConfigurationError(f"coefficients is missing the key {key!r}")
    diffusion = _parse_field(coeff["diffusion"], dimension, "coefficients.diffusion")
    raw_drift = coeff["drift"]
    if not isinstance(raw_drift, Sequence) or isinstance(raw_drift, (str, Mapping)):
        raise ConfigurationError(
            "coefficients.drift must be a list with one entry per dimension"
        )
    if len(raw_drift) != dimension:
        raise ConfigurationError(
            f"coefficients.drift needs {dimension} component(s), got {len(raw_drift)}"
        )
    drift = tuple(
        _parse_field(entry, dimension, f"coefficients.drift[{i}]")
        for i, entry in enumerate(raw_drift)
    )
    potential = _parse_field(coeff["potential"], dimension, "coefficients.potential")

    schedule_raw = top["schedule"]
    if not isinstance(schedule_raw, Sequence) or isinstance(schedule_raw, str):
        raise ConfigurationError("schedule must be a list of numbers")
    schedule = tuple(float(s) for s in schedule_raw)

    solver_entry = _require_mapping(top.get("solver", {}), "solver")
    _check_keys(solver_entry, ("tol", "max_iter", "linear_solver"), "solver")

    model_entry = _require_mapping(top.get("model", {}), "model")
    _check_keys(model_entry, ("family", "gamma", "alpha", "coupling"), "model")
    model = ModelSpec(
        family=str(model_entry.get("family", "quadratic_log")),
        gamma=float(model_entry.get("gamma", 2.0)),
        alpha=float(model_entry.get("alpha", 1.0)),
        coupling=float(model_entry.get("coupling", 1.0)),
    )

    smoothing_order = top.get("smoothing_order")
    if smoothing_order is not None:
        smoothing_order = int(smoothing_order)
    penalty_exponent = top.get("penalty_exponent")
    if penalty_exponent is not None:
        penalty_exponent = float(penalty_exponent)

    return ExperimentConfig(
        dimension=dimension,
        points=points,
        diffusion=diffusion,
        drift=drift,
        potential=potential,
        schedule=schedule,
        smoothing_order=smoothing_order,
        penalty_exponent=penalty_exponent,
        tol=float(solver_entry.get("tol", 1e-11)),
        max_iter=int(solver_entry.get("max_iter", 40)),
        linear_solver=str(solver_entry.get("linear_solver", "gmres")),
        seed=int(top.get("seed", 0)),
        model=model,
    )


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigurationError(f"could not parse {path}: {err}") from err
    return parse_config(raw)


def realize_field(spec: FieldSpec, grid: Grid) -> PeriodicField:
    """Synthesize the band-limited field the spec describes, exactly."""
    xs = nodes(grid)
    values = np.full(grid.shape, float(spec.constant))
    limit = grid.n // 2 - 1
    for mode in spec.modes:
        if any(abs(k) > limit for k in mode.k):
            raise ConfigurationError(
                f"mode {mode.k} exceeds the alias-free band |k| <= {limit} at n={grid.n}"
            )
        phase = 2.0 * np.pi * sum(k * x for k, x in zip(mode.k, xs))
        values = values + mode.cos * np.cos(phase) + mode.sin * np.sin(phase)
    return PeriodicField(grid, values)


def realize_drift(specs: Sequence[FieldSpec], grid: Grid) -> VectorField:
    if len(specs) != grid.d:
        raise ConfigurationError(
            f"drift needs {grid.d} component(s), got {len(specs)}"
        )
    parts = [realize_field(spec, grid).values for spec in specs]
    return VectorField(grid, np.stack(parts))


def build_problem(config: ExperimentConfig) -> StationaryProblem:
    grid = make_grid(config.dimension, config.points)
    return StationaryProblem(
        diffusion=realize_field(config.diffusion, grid),
        drift=realize_drift(config.drift, grid),
        potential=realize_field(config.potential, grid),
    )


def config_digest(config: ExperimentConfig) -> str:
    """sha256 of the canonical JSON form; stable across runs and machines."""
    canonical = json.dumps(asdict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
