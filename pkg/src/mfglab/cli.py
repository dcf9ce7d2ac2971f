"""Command-line entry points.

Subcommands: ``solve`` and ``sweep`` run the smoothing continuation from a
YAML config (``sweep`` also emits the delimited table, JSON summary, and a
rendered convergence figure); ``uniqueness`` reruns the continuation from
several starts and schedules and compares the limits; ``mollify-audit``,
``monotonicity-audit``, and ``exponent-check`` exercise the structural
identities without touching the solver.

Exit codes: 0 on success, 1 when a check or solve fails, 2 on bad input.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ExperimentConfig, build_problem, load_config
from .errors import (
    ConfigurationError,
    DomainError,
    FieldFormatError,
    ParameterError,
    ResolutionError,
)
from .fieldio import write_fields
from .models import (
    CongestionHamiltonian,
    PowerHamiltonian,
    QuadraticLogHamiltonian,
    check_exponent_profile,
    sample_monotonicity,
)
from .mollify import (
    adapted_mollify,
    one_sided_time_mollify,
    overlap_pairing,
    spatial_mollify,
    symmetry_pairing_residual,
    zero_extend_time,
)
from .operators import _band_limited, cancellation_residual
from .torus import PeriodicField, SpaceTimeField, constant_field, make_grid, nodes

__all__ = ["main"]


def _load(args) -> ExperimentConfig:
    config = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config = dataclasses.replace(config, seed=args.seed)
    return config


# ---------------------------------------------------------------------------
# solve / sweep / uniqueness
# ---------------------------------------------------------------------------


def _cmd_solve(args) -> int:
    from .experiments import run_experiment

    config = _load(args)
    result = run_experiment(config)
    for row in result.rows:
        print(
            f"stage sigma={row.sigma:.6g}: iterations={row.iterations} "
            f"residual={row.residual:.3e} mass_defect={row.mass_residual:.3e}"
        )
    if not result.success:
        print(f"solve FAILED: {result.failure_message}")
        return 1
    density = result.final_density
    value = result.final_value
    print(
        f"final density range [{density.values.min():.6g}, {density.values.max():.6g}]; "
        f"value range [{value.values.min():.6g}, {value.values.max():.6g}]"
    )
    if args.out_dir is not None:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "fields.bin"
        write_fields(path, density.grid, [density.values, value.values])
        print(f"wrote {path}")
    return 0


def _cmd_sweep(args) -> int:
    from .experiments import emit_report, run_experiment

    config = _load(args)
    result = run_experiment(config)
    paths = emit_report(result, args.out_dir, formats=tuple(args.format))
    for kind, path in sorted(paths.items()):
        print(f"wrote {kind}: {path}")
    if result.rate_sqrt_m is not None:
        tag = " (degenerate)" if result.rate_sqrt_m.degenerate else ""
        print(f"density root-difference rate: {result.rate_sqrt_m.slope:.4f}{tag}")
    if result.rate_u is not None:
        tag = " (degenerate)" if result.rate_u.degenerate else ""
        print(f"value distance rate: {result.rate_u.slope:.4f}{tag}")
    if result.u_norm_strictly_decreasing is not None:
        print(
            "value norm strictly decreasing: "
            + ("yes" if result.u_norm_strictly_decreasing else "no")
        )
    for name, report in result.uniformity:
        verdict = "within" if report.passed else "EXCEEDS"
        print(
            f"uniformity[{name}]: max {report.max_abs:.6g} {verdict} "
            f"bound {report.bound:.6g}"
        )
    for check in result.entropy_checks:
        verdict = "holds" if check.satisfied else "VIOLATED"
        print(
            f"entropy bound (delta={check.delta:g}): slack {check.slack:.3e} "
            f"{verdict}"
        )
    if not result.success:
        print(f"sweep FAILED: {result.failure_message}")
        return 1
    return 0


def _cmd_uniqueness(args) -> int:
    from .experiments import uniqueness_experiment

    config = _load(args)
    report = uniqueness_experiment(config)
    print(f"runs: {report.runs} (stages per run: {report.stage_counts})")
    print(f"pairwise density sup-difference: {report.pairwise_density_sup:.3e}")
    print(f"pairwise value sup-difference: {report.pairwise_value_sup:.3e}")
    print(f"weak inequality minimum over battery: {report.weak_minimum:.3e}")
    if not report.converged:
        print("uniqueness FAILED: not every continuation converged")
        return 1
    print("verdict: " + ("all paths agree" if report.passed else "DISAGREEMENT"))
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# structural audits
# ---------------------------------------------------------------------------


def _print_check(name: str, value: float, tolerance: float) -> bool:
    ok = value <= tolerance
    print(f"{name}: {value:.3e} (tolerance {tolerance:.1e}) {'PASS' if ok else 'FAIL'}")
    return ok


def _cmd_mollify_audit(args) -> int:
    rng = np.random.default_rng(args.seed)
    grid = make_grid(1, 64)
    ok = True

    worst = 0.0
    for _ in range(20):
        f = PeriodicField(grid, _band_limited(grid, rng, max_mode=5, scale=0.4))
        g = PeriodicField(grid, _band_limited(grid, rng, max_mode=5, scale=0.4))
        scale = max(
            1.0, float(np.max(np.abs(f.values))) * float(np.max(np.abs(g.values)))
        )
        worst = max(worst, abs(symmetry_pairing_residual(f, g, 0.1)) / scale)
    ok &= _print_check("spatial kernel symmetry", worst, 1e-12)

    f = PeriodicField(grid, _band_limited(grid, rng, max_mode=4, scale=0.5))
    direct = spatial_mollify(f, 0.12, passes=2)
    adapted = adapted_mollify(constant_field(grid, 1.0), f, 0.12)
    defect = float(np.max(np.abs(direct.values - adapted.values)))
    ok &= _print_check("adapted mollifier unit-coefficient reduction", defect, 1e-13)

    tgrid = make_grid(1, 16)
    times = np.linspace(0.0, 1.0, 65)
    worst = 0.0
    for passes in (1, 2):
        for _ in range(10):
            fx = _band_limited(tgrid, rng, max_mode=3, scale=0.5)
            gx = _band_limited(tgrid, rng, max_mode=3, scale=0.5)
            ft = np.sin(2.0 * np.pi * times) + rng.normal(0.0, 0.3)
            gt = np.cos(2.0 * np.pi * times) + rng.normal(0.0, 0.3)
            f_st = SpaceTimeField(tgrid, times, np.multiply.outer(ft, fx))
            g_st = SpaceTimeField(tgrid, times, np.multiply.outer(gt, gx))
            lhs = overlap_pairing(
                one_sided_time_mollify(zero_extend_time(f_st), 0.1, "forward", passes),
                g_st,
            )
            rhs = overlap_pairing(
                f_st,
                one_sided_time_mollify(zero_extend_time(g_st), 0.1, "backward", passes),
            )
            scale = max(1.0, abs(lhs), abs(rhs))
            worst = max(worst, abs(lhs - rhs) / scale)
    ok &= _print_check("one-sided time kernel adjointness", worst, 1e-11)

    x = nodes(grid)[0]
    diffusion = PeriodicField(grid, 1.0 + 0.3 * np.cos(2.0 * np.pi * x))
    worst = 0.0
    for width in (0.1, 0.05):
        for _ in range(20):
            dm = PeriodicField(grid, _band_limited(grid, rng, max_mode=4, scale=0.4))
            dv = PeriodicField(grid, _band_limited(grid, rng, max_mode=4, scale=0.4))
            worst = max(worst, cancellation_residual(diffusion, dm, dv, width))
    ok &= _print_check("adapted cross-term cancellation", worst, 1e-10)

    return 0 if ok else 1


def _cmd_monotonicity_audit(args) -> int:
    config = _load(args)
    spec = config.model
    if spec.family == "power":
        model = PowerHamiltonian(spec.gamma, coupling=spec.coupling)
    elif spec.family == "congestion":
        model = CongestionHamiltonian(spec.gamma, spec.alpha)
    else:
        problem = build_problem(config)
        model = QuadraticLogHamiltonian.from_coefficients(
            problem.diffusion, problem.drift, problem.potential
        )
    report = sample_monotonicity(
        model, config.dimension, samples=args.samples, seed=config.seed
    )
    print(
        f"family={spec.family} samples={report.samples} "
        f"min_eigenvalue={report.min_eigenvalue:.6e}"
    )
    print(
        f"witness: momentum={tuple(round(p, 4) for p in report.witness_momentum)} "
        f"density={report.witness_density:.4f}"
    )
    print("verdict: " + ("monotone on the sample cloud" if report.positive else "NOT monotone"))
    return 0 if report.positive else 1


def _cmd_exponent_check(args) -> int:
    profile = check_exponent_profile(
        args.values[0], args.values[1], args.values[2], args.values[3], args.dim
    )
    print(f"conjugate rate: {profile.conjugate_rate:.6g}")
    sob = profile.sobolev_conjugate
    print(f"embedding conjugate: {sob:.6g}" if sob is not None else "embedding conjugate: undefined")
    labels = ("coupling*gradient", "coupling^2", "coupling^2*gradient", "coupling*gradient^2")
    for label, q in zip(labels, profile.product_exponents):
        print(f"pairing exponent [{label}]: " + (f"{q:.6g}" if q is not None else "undefined"))
    for name in ("growth_ordering_ok", "integrability_ok", "superquadratic_ok", "defined_ok"):
        print(f"{name}: {getattr(profile, name)}")
    print("admissible: " + ("yes" if profile.admissible else "no"))
    return 0 if profile.admissible else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfglab",
        description="Numerical laboratory for monotone mean-field systems on the torus.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_options(p, out_required=False, out_default=None):
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument(
            "--out-dir",
            required=out_required,
            default=out_default,
            help="directory for rendered reports and field files",
        )
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p_solve = sub.add_parser("solve", help="run the continuation and print stage lines")
    add_config_options(p_solve)
    p_solve.set_defaults(handler=_cmd_solve)

    p_sweep = sub.add_parser("sweep", help="run the continuation and emit reports")
    add_config_options(p_sweep, out_required=True)
    p_sweep.add_argument(
        "--format",
        nargs="+",
        choices=("csv", "json", "svg"),
        default=("csv", "json", "svg"),
        help="report kinds to write",
    )
    p_sweep.set_defaults(handler=_cmd_sweep)

    p_uni = sub.add_parser(
        "uniqueness", help="compare continuation limits from several starts"
    )
    add_config_options(p_uni)
    p_uni.set_defaults(handler=_cmd_uniqueness)

    p_mol = sub.add_parser("mollify-audit", help="check the mollifier identities")
    p_mol.add_argument("--seed", type=int, default=0)
    p_mol.set_defaults(handler=_cmd_mollify_audit)

    p_mono = sub.add_parser(
        "monotonicity-audit", help="sample the structure matrix of a model family"
    )
    add_config_options(p_mono)
    p_mono.add_argument("--samples", type=int, default=10_000)
    p_mono.set_defaults(handler=_cmd_monotonicity_audit)

    p_exp = sub.add_parser(
        "exponent-check", help="derive pairing exponents for a growth configuration"
    )
    p_exp.add_argument(
        "values",
        type=float,
        nargs=4,
        metavar=("COUPLING_GROWTH", "COUPLING_RATE", "KINETIC_GROWTH", "KINETIC_RATE"),
        help="growth bounds and integrability rates",
    )
    p_exp.add_argument("--dim", type=int, required=True)
    p_exp.set_defaults(handler=_cmd_exponent_check)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (
        ConfigurationError,
        ParameterError,
        DomainError,
        ResolutionError,
        FieldFormatError,
        FileNotFoundError,
    ) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
