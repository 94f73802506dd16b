"""``weyl-lab`` command line: one subcommand per experiment.

Every subcommand reads an :class:`~weyllab.config.ExperimentConfig` (file
values overridden by flags), writes its CSV/JSON/SVG artifacts plus the
effective ``config.txt`` into the output directory, and exits with 0 on
success, 1 when a check fails or a numerical routine gives up, and 2 on
invalid input.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from .config import ExperimentConfig, SOURCES, load_config
from .duhamel import (
    OperatorPair,
    build_operator_pair,
    case_report,
    duhamel_identity_check,
    fit_trace_envelope,
    trace_perturbation_sum,
)
from .errors import InvalidInputError, UnsupportedDomainError
from .geometry import Shape, build_grid
from .heat import (
    check_long_time,
    direct_inverse_kernel,
    fit_gaussian_bound,
    heat_trace,
    heat_trace_report,
    riesz_kernel,
)
from .multipliers import (
    DECAY_ORDERS,
    DyadicDecomposition,
    MollifierSpec,
    WindowSpec,
    certify_m0_bound,
    certify_symbol_bounds,
    check_indicator_decay,
    decay_grid,
    decay_shell_ratio,
    dyadic_partition,
    indicator_profile,
    mollification_trace_error,
    route_agreement,
    smoothed_values,
    window,
)
from .operators import AssembledOperator, assemble_laplacian, assemble_schrodinger, normalize_shift, save_operator
from .parallel import ordered_map
from .potentials import kato_norm, l1_norm, split_potential
from .report import write_csv, write_json
from .spectrum import (
    ExactSpectrum,
    FrequencySource,
    SpectralData,
    check_counting_range,
    counting_function,
    eigendecompose,
    exact_disk_spectrum,
    exact_rectangle_spectrum,
    export_spectrum_csv,
    frequency_view,
)
from .suite import SCALES, AcceptanceSuite, CheckResult, summarize
from .weyl import (
    count_difference,
    fit_remainder_exponent,
    make_lambda_grid,
    remainder_curve,
    short_interval_sweep,
    weyl_coefficients,
)

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"
SHORT_INTERVAL_LIMIT = 3.0
DOUBLING_SHELL = 64.0
KATO_RADII = (0.4, 0.2, 0.1, 0.05, 0.025)
ROUTE_SAMPLES = 100
IDENTITY_TOL = 1e-8

Command = Callable[..., bool]


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _exact_spectrum(config: ExperimentConfig, cutoff: float) -> ExactSpectrum:
    bc = config.boundary()
    if config.shape == Shape.DISK.value:
        return exact_disk_spectrum(config.radius, bc, cutoff)
    return exact_rectangle_spectrum(config.a, config.b, bc, cutoff)


def _grid_operator(config: ExperimentConfig, shifted: bool = False) -> AssembledOperator:
    grid = build_grid(config.domain(), config.h)
    bc = config.boundary()
    potential = config.potential_spec()
    if potential.is_zero:
        op = assemble_laplacian(grid, bc)
    else:
        op = assemble_schrodinger(grid, bc, potential)
    return normalize_shift(op) if shifted else op


def _source(config: ExperimentConfig, cutoff: Optional[float] = None) -> FrequencySource:
    """Exact oracle (complete up to ``cutoff``) or the discrete spectrum of the grid."""

    if config.source == "exact":
        if not config.potential_spec().is_zero:
            logger.warning("exact oracles ignore the potential %s", config.potential)
        return _exact_spectrum(config, cutoff if cutoff is not None else config.lambda_max)
    return eigendecompose(_grid_operator(config))


def _lambdas(config: ExperimentConfig) -> np.ndarray:
    return make_lambda_grid(config.lambda_min, config.lambda_max, config.lambda_step)


def _out(config: ExperimentConfig, name: str) -> Path:
    return config.out_dir / name


def _pair(config: ExperimentConfig) -> OperatorPair:
    return build_operator_pair(build_grid(config.domain(), config.h), config.boundary(), config.potential_spec())


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def run_spectrum(config: ExperimentConfig) -> bool:
    """Export the frequencies of the exact oracle or the grid operator."""

    payload: Dict[str, Any] = {}
    if config.source == "grid":
        op = _grid_operator(config)
        data = eigendecompose(op)
        save_operator(op, _out(config, "operator.bin"))
        payload.update(operator=op.describe(), grid=op.grid.to_dict(), gram_error=data.gram_error())
        frequencies, ceiling = data.frequencies, data.counting_ceiling
    else:
        oracle = _exact_spectrum(config, config.lambda_max)
        payload["oracle"] = oracle.to_dict()
        frequencies, ceiling = oracle.frequencies, oracle.cutoff
    export_spectrum_csv(frequencies, _out(config, "spectrum.csv"))
    payload.update(count=int(frequencies.size), trusted_up_to=ceiling)
    write_json(_out(config, "spectrum.json"), payload)
    return True


def run_count(config: ExperimentConfig) -> bool:
    """Counting function N(λ) on the λ grid."""

    lambdas = _lambdas(config)
    source = _source(config)
    if isinstance(source, SpectralData):
        check_counting_range(source, lambdas)
    frequencies, _ = frequency_view(source)
    counts = counting_function(frequencies, lambdas)
    write_csv(_out(config, "count.csv"), ("lambda", "N"), zip(lambdas.tolist(), counts.tolist()))
    payload: Dict[str, Any] = {
        "source": config.source,
        "lambda_min": float(lambdas[0]),
        "lambda_max": float(lambdas[-1]),
        "N_max": int(counts[-1]),
    }
    if isinstance(source, SpectralData) and not config.potential_spec().is_zero:
        free = eigendecompose(assemble_laplacian(source.grid, config.boundary()))
        difference = count_difference(free, source, lambdas)
        difference.write_csv(_out(config, "count_difference.csv"))
        payload["difference"] = difference.to_dict()
    write_json(_out(config, "count.json"), payload)
    return True


def run_weyl(config: ExperimentConfig) -> bool:
    """One- and two-term Weyl remainders with their growth exponents."""

    coefficients = weyl_coefficients(config.domain(), config.boundary())
    curve = remainder_curve(_source(config), coefficients, _lambdas(config))
    curve.write_csv(_out(config, "weyl.csv"))
    curve.write_svg(_out(config, "weyl.svg"))
    fits: Dict[str, Any] = {}
    for which in ("R1", "R2"):
        try:
            fits[which] = fit_remainder_exponent(curve, (config.lambda_min, config.lambda_max), which).to_dict()
        except InvalidInputError as exc:
            logger.warning("no %s exponent: %s", which, exc)
            fits[which] = None
    write_json(_out(config, "weyl.json"), {"coefficients": coefficients.to_dict(), "fits": fits})
    return True


def run_short_interval(config: ExperimentConfig) -> bool:
    """Counts in [λ, λ+ε] against ελ^(n-1) + λ^(n-3/2)."""

    lambdas = _lambdas(config)
    source = _source(config, cutoff=config.lambda_max + config.eps)
    sweep = short_interval_sweep(source, lambdas, config.eps, config.domain().dimension)
    write_csv(
        _out(config, "short_interval.csv"),
        ("lambda", "count", "ratio"),
        zip(sweep.lambdas.tolist(), sweep.counts.tolist(), sweep.ratios.tolist()),
    )
    payload = dict(sweep.to_dict(), limit=SHORT_INTERVAL_LIMIT)
    write_json(_out(config, "short_interval.json"), payload)
    return sweep.max_ratio <= SHORT_INTERVAL_LIMIT


def run_heat_trace(config: ExperimentConfig) -> bool:
    """Exact rectangle heat traces against the short-time expansion."""

    if config.shape != Shape.RECTANGLE.value:
        raise UnsupportedDomainError("heat-trace compares against rectangle oracles only")
    report = heat_trace_report(config.a, config.b, config.boundary(), config.times)
    report.write_csv(_out(config, "heat_trace.csv"))
    payload = report.to_dict()
    if config.source == "grid":
        data = eigendecompose(_grid_operator(config))
        payload["discrete_traces"] = [heat_trace(data, t) for t in config.times]
    write_json(_out(config, "heat_trace.json"), payload)
    return True


def run_heat_bound(config: ExperimentConfig) -> bool:
    """Gaussian heat-kernel bound and the long-time decay check."""

    short_times = [t for t in config.times if t <= 1.0]
    if not short_times:
        raise InvalidInputError("heat-bound needs at least one time in (0, 1]")
    data = eigendecompose(_grid_operator(config))
    fit = fit_gaussian_bound(data, short_times, config.samples, config.seed)
    shifted = eigendecompose(_grid_operator(config, shifted=True))
    long_time = check_long_time(shifted, np.linspace(2.0, 20.0, 19), seed=config.seed)
    write_json(_out(config, "heat_bound.json"), {"gaussian": fit.to_dict(), "long_time": long_time.to_dict()})
    return fit.violations == 0 and long_time.nonincreasing_after_two


def run_riesz(config: ExperimentConfig) -> bool:
    """Riesz kernels by spectral sum, heat integral and direct solve."""

    op = _grid_operator(config, shifted=True)
    data = eigendecompose(op)
    kernels = ordered_map(lambda ell: riesz_kernel(data, ell), config.ells)
    payload: Dict[str, Any] = {"routes": [kernel.to_dict() for kernel in kernels]}
    passed = True
    for kernel in kernels:
        if kernel.ell == 0:
            direct = direct_inverse_kernel(op.matrix, data.weight)
            gap = float(np.max(np.abs(kernel.spectral - direct)) / np.max(np.abs(direct)))
            payload["direct_relative_difference"] = gap
            passed = gap <= IDENTITY_TOL
    write_json(_out(config, "riesz.json"), payload)
    return passed


def run_mollifier(config: ExperimentConfig) -> bool:
    """Mollified indicator: profile, route agreement, decay and trace error."""

    spec = MollifierSpec(config.eps)
    lam = config.lambda_min
    profile = indicator_profile(spec, lam, np.linspace(0.0, 2.0 * lam, 401))
    profile.write_csv(_out(config, "mollifier.csv"))
    profile.write_svg(_out(config, "mollifier.svg"))
    rng = np.random.default_rng(config.seed)
    triples = list(
        zip(
            rng.uniform(1.0, 2.0 * lam, ROUTE_SAMPLES).tolist(),
            rng.uniform(0.1, 1.0, ROUTE_SAMPLES).tolist(),
            rng.uniform(0.0, 4.0 * lam, ROUTE_SAMPLES).tolist(),
        )
    )
    route = route_agreement(triples)
    doubling = decay_shell_ratio(spec, lam, DOUBLING_SHELL)
    fits = [check_indicator_decay(spec, lam, order, decay_grid(lam, spec.epsilon)) for order in DECAY_ORDERS]
    source = _source(config, cutoff=max(config.lambda_max, lam + 400.0 * spec.epsilon))
    if isinstance(source, SpectralData):
        check_counting_range(source, lam)
    frequencies, _ = frequency_view(source)
    write_json(
        _out(config, "mollifier.json"),
        {
            "mollifier": spec.to_dict(),
            "lambda": lam,
            "route_agreement": route,
            "doubling_ratio": doubling,
            "decay": [fit.to_dict() for fit in fits],
            "trace_error": mollification_trace_error(frequencies, spec, lam),
        },
    )
    return route <= 1e-6 and doubling >= 8.0


def run_lp_check(config: ExperimentConfig) -> bool:
    """Dyadic partition of unity and certified symbol constants."""

    decomp = DyadicDecomposition(MollifierSpec(config.eps))
    lam = config.lambda_min
    gap = max(abs(dyadic_partition(decomp, float(s), 12).total - 1.0) for s in np.geomspace(1e-3, 1e3, 200))
    ells = [ell for ell in config.ells if ell > decomp.ell0]
    skipped = sorted(set(config.ells) - set(ells))
    if skipped:
        logger.warning("levels %s are not above the mollifier level %d", skipped, decomp.ell0)
    cases = [(ell, nu, sign) for ell in ells for nu in (0, 1) for sign in (-1, 1)]
    certificates = [
        cert for pair in ordered_map(lambda case: certify_symbol_bounds(decomp, lam, *case), cases) for cert in pair
    ]
    certificates += [certify_m0_bound(decomp, lam, nu, sign) for nu in (0, 1) for sign in (-1, 1)]
    write_json(
        _out(config, "lp_check.json"),
        {
            "lambda": lam,
            "ell0": decomp.ell0,
            "partition_gap": gap,
            "certificates": [cert.to_dict() for cert in certificates],
        },
    )
    finite = all(math.isfinite(cert.constant) and math.isfinite(cert.refined) for cert in certificates)
    return gap <= 1e-12 and finite and all(cert.stable for cert in certificates)


def run_duhamel(config: ExperimentConfig) -> bool:
    """Duhamel identity residuals for the free/perturbed pair."""

    pair = _pair(config)
    checks = [duhamel_identity_check(pair, t) for t in config.times]
    write_json(
        _out(config, "duhamel.json"),
        {"pair": pair.to_dict(), "checks": [check.to_dict() for check in checks]},
    )
    return all(check.relative <= IDENTITY_TOL for check in checks)


def run_case_report(config: ExperimentConfig) -> bool:
    """Trace perturbation sums split into short- and long-interval cases."""

    pair = _pair(config)
    lam = config.lambda_min
    report = case_report(pair, lam, config.eps)
    window_spec = WindowSpec(config.eps)
    mollifier = MollifierSpec(config.eps)
    sums = {
        "window": trace_perturbation_sum(pair, lambda mu: np.asarray(window(window_spec, lam, mu))),
        "mollified_indicator": trace_perturbation_sum(pair, lambda mu: smoothed_values(mollifier, lam, mu)),
    }
    rows = [
        (family.multiplier, block.name, block.index_count, block.partial_sum, block.bound_form, block.bound_value)
        for family in (report.short_interval, report.long_interval)
        for block in family.blocks
    ]
    write_csv(
        _out(config, "case_report.csv"),
        ("multiplier", "case", "index_count", "partial_sum", "bound_form", "bound_value"),
        rows,
    )
    top = min(config.lambda_max, pair.free.counting_ceiling)
    payload: Dict[str, Any] = {
        "report": report.to_dict(),
        "trace_sums": {name: value.to_dict() for name, value in sums.items()},
    }
    if top > lam:
        lambdas = make_lambda_grid(lam, top, config.lambda_step)
        if lambdas.size >= 2:
            payload["envelope"] = fit_trace_envelope(pair, lambdas, (config.eps, 0.5 * config.eps)).to_dict()
    write_json(_out(config, "case_report.json"), payload)
    reconciled = report.short_interval.reconciled and report.long_interval.reconciled
    return reconciled and all(value.residual <= IDENTITY_TOL for value in sums.values())


def run_kato(config: ExperimentConfig) -> bool:
    """Kato norms over shrinking radii and the truncation split."""

    domain = config.domain()
    if domain.shape is not Shape.RECTANGLE:
        raise UnsupportedDomainError("kato integrates over rectangles only")
    potential = config.potential_spec()
    norms = [kato_norm(potential, domain, delta) for delta in KATO_RADII]
    split = split_potential(potential, domain, config.eps)
    write_json(
        _out(config, "kato.json"),
        {
            "radii": list(KATO_RADII),
            "kato_norms": norms,
            "l1_norm": l1_norm(potential, domain),
            "split": split.to_dict(),
        },
    )
    return all(later <= earlier for earlier, later in zip(norms, norms[1:]))


def run_full_report(
    config: ExperimentConfig, scale: str = "full", checks: Optional[Sequence[str]] = None
) -> bool:
    """Run the acceptance suite and aggregate pass/fail."""

    if scale not in SCALES:
        raise InvalidInputError(f"unknown suite scale {scale!r}")
    suite = AcceptanceSuite(SCALES[scale], seed=config.seed)

    def announce(result: CheckResult) -> None:
        print(f"{result.case}: {'passed' if result.passed else 'FAILED'}")

    results = suite.run(checks, on_result=announce)
    summary = summarize(results)
    summary["scale"] = scale
    write_json(_out(config, "full_report.json"), summary)
    return bool(summary["passed"])


COMMANDS: Dict[str, Command] = {
    "spectrum": run_spectrum,
    "count": run_count,
    "weyl": run_weyl,
    "short-interval": run_short_interval,
    "heat-trace": run_heat_trace,
    "heat-bound": run_heat_bound,
    "riesz": run_riesz,
    "mollifier": run_mollifier,
    "lp-check": run_lp_check,
    "duhamel": run_duhamel,
    "case-report": run_case_report,
    "kato": run_kato,
    "full-report": run_full_report,
}


def run_subcommand(name: str, config: ExperimentConfig, **options: Any) -> int:
    """Run one subcommand and map its outcome to an exit code."""

    command = COMMANDS.get(name)
    if command is None:
        print(f"unknown subcommand {name!r}; choose from {', '.join(COMMANDS)}", file=sys.stderr)
        return 2
    try:
        config.out_dir.mkdir(parents=True, exist_ok=True)
        (config.out_dir / "config.txt").write_text(config.to_text(), encoding="utf-8")
        passed = command(config, **options)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"{name}: {'passed' if passed else 'FAILED'} ({config.out_dir})")
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _number(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def _number_list(text: str) -> List[float]:
    return [_number(item) for item in text.split(",") if item.strip()]


def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from exc


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Plain-text 'key = value' config file.")
    common.add_argument("--out", help="Output directory.")
    common.add_argument("--shape", choices=[shape.value for shape in Shape])
    common.add_argument("--a", type=_number, help="Rectangle width.")
    common.add_argument("--b", type=_number, help="Rectangle height.")
    common.add_argument("--radius", type=_number, help="Disk radius.")
    common.add_argument("--bc", help="dirichlet, neumann or robin:SIGMA.")
    common.add_argument("--potential", "-V", help="Potential expression, e.g. 'inverse_power(0.5, 0.5, 1)'.")
    common.add_argument("--h", type=_number, help="Grid spacing (fractions such as 1/33 accepted).")
    common.add_argument("--eps", type=_number, help="Mollifier / window scale in (0, 1].")
    common.add_argument("--lambda-min", type=_number)
    common.add_argument("--lambda-max", type=_number)
    common.add_argument("--lambda-step", type=_number)
    common.add_argument("--times", type=_number_list, help="Comma-separated heat/wave times.")
    common.add_argument("--ells", type=_int_list, help="Comma-separated dyadic or Riesz levels.")
    common.add_argument("--source", choices=SOURCES, help="Exact oracle or discrete grid spectrum.")
    common.add_argument("--samples", type=int, help="Sample count for kernel bounds.")
    common.add_argument("--seed", type=int, help="Seed for sampled node subsets.")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging.")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weyl-lab",
        description="Numerical experiments on Weyl laws, heat kernels and spectral multipliers.",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", required=True)
    common = _common_options()
    for name, command in COMMANDS.items():
        summary = (command.__doc__ or "").strip().splitlines()
        sub = subparsers.add_parser(name, parents=[common], help=summary[0] if summary else None)
        if name == "full-report":
            sub.add_argument("--scale", choices=sorted(SCALES), default="full")
            sub.add_argument("--checks", help="Comma-separated subset of checks to run.")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config)
    return config.with_overrides(
        out=args.out,
        shape=args.shape,
        a=args.a,
        b=args.b,
        radius=args.radius,
        bc=args.bc,
        potential=args.potential,
        h=args.h,
        eps=args.eps,
        lambda_min=args.lambda_min,
        lambda_max=args.lambda_max,
        lambda_step=args.lambda_step,
        times=tuple(args.times) if args.times is not None else None,
        ells=tuple(args.ells) if args.ells is not None else None,
        source=args.source,
        samples=args.samples,
        seed=args.seed,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format=LOG_FORMAT)
    try:
        config = config_from_args(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    options: Dict[str, Any] = {}
    if args.command == "full-report":
        options["scale"] = args.scale
        if args.checks:
            options["checks"] = [item.strip() for item in args.checks.split(",") if item.strip()]
    return run_subcommand(args.command, config, **options)


if __name__ == "__main__":
    raise SystemExit(main())
