"""Acceptance suite: an ordered list of named checks run to completion."""

from __future__ import annotations

import functools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .builder import parse_potential
from .duhamel import OperatorPair, build_operator_pair, case_report, duhamel_identity_check, trace_perturbation_sum
from .errors import InvalidInputError, WeylLabError
from .geometry import DIRICHLET, Grid, Shape, grid_for_points, make_domain
from .heat import check_long_time, direct_inverse_kernel, fit_gaussian_bound, heat_trace_report, riesz_kernel
from .multipliers import (
    DyadicDecomposition,
    MollifierSpec,
    WindowSpec,
    certify_m0_bound,
    certify_symbol_bounds,
    check_indicator_decay,
    decay_grid,
    decay_shell_ratio,
    dyadic_partition,
    indicator,
    lp_symbols,
    route_agreement,
    smoothed_values,
    window,
)
from .operators import assemble_laplacian, assemble_schrodinger, normalize_shift
from .parallel import ordered_map
from .spectrum import (
    SpectralData,
    counting_function,
    eigendecompose,
    eigenfunction_bound_sweep,
    exact_disk_spectrum,
    exact_rectangle_spectrum,
)
from .weyl import (
    RemainderCurve,
    count_difference,
    fit_remainder_exponent,
    make_lambda_grid,
    remainder_curve,
    short_interval_sweep,
    weyl_coefficients,
)

logger = logging.getLogger(__name__)

SINGULAR_POTENTIAL = "inverse_power(x0=0.5, y0=0.5, alpha=1)"
DUHAMEL_TIMES = (0.1, 0.5, 1.0, 2.0)
GAUSSIAN_TIMES = (0.005, 0.01, 0.05, 0.1, 0.5, 1.0)
LONG_TIMES = tuple(float(t) for t in np.linspace(2.0, 20.0, 19))
HEAT_TIMES = (0.01, 0.005, 0.0025, 0.00125)
RIESZ_ELLS = (0, 1, 2)
SHORT_EPSILONS = (1.0, 0.5)


@dataclass(frozen=True)
class SuiteScale:
    """Problem sizes for one run of the suite."""

    name: str
    schrodinger_points: int
    identity_points: int
    kernel_points: int
    kernel_samples: int
    riesz_points: int
    route_triples: int


FULL = SuiteScale("full", 64, 12, 32, 10_000, 16, 1_000)
DESK = SuiteScale("desk", 40, 8, 16, 2_000, 8, 100)
SCALES = {scale.name: scale for scale in (FULL, DESK)}


@dataclass(frozen=True)
class CheckResult:
    case: str
    passed: bool
    details: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {"case": self.case, "passed": self.passed, "details": self.details}
        if self.error is not None:
            payload["error"] = self.error
        return payload


Check = Callable[[], Tuple[bool, Dict[str, Any]]]


def _unit_square_grid(points: int) -> Grid:
    return grid_for_points(make_domain(Shape.RECTANGLE, a=1.0, b=1.0), points)


def _brute_force_count(lam: float) -> int:
    """Lattice points ``m, k >= 1`` with ``π² (m² + k²) <= λ²``."""

    bound = (lam / math.pi) ** 2
    top = int(math.isqrt(int(bound))) + 1
    return sum(1 for m in range(1, top + 1) for k in range(1, top + 1) if m * m + k * k <= bound)


class AcceptanceSuite:
    """Run the acceptance checks in order and collect their results.

    Args:
        scale: ``FULL`` reproduces the stated problem sizes; ``DESK`` shrinks
            the grids so the whole suite runs in seconds.
        seed: Seed for every random sample.
        workers: Thread cap handed to :func:`weyllab.parallel.ordered_map`.
    """

    def __init__(self, scale: SuiteScale = FULL, seed: int = 0, workers: Optional[int] = None) -> None:
        self.scale = scale
        self.seed = seed
        self.workers = workers
        self.potential = parse_potential(SINGULAR_POTENTIAL)

    def checks(self) -> List[Tuple[str, Check]]:
        return [
            ("exact_counting", self.check_exact_counting),
            ("weyl_one_term", self.check_weyl_one_term),
            ("weyl_two_term", self.check_weyl_two_term),
            ("schrodinger_weyl", self.check_schrodinger_weyl),
            ("duhamel_identity", self.check_duhamel_identity),
            ("trace_sums", self.check_trace_sums),
            ("heat_trace", self.check_heat_trace),
            ("gaussian_bound", self.check_gaussian_bound),
            ("riesz_relation", self.check_riesz_relation),
            ("mollifier", self.check_mollifier),
            ("littlewood_paley", self.check_littlewood_paley),
            ("short_interval", self.check_short_interval),
        ]

    def run(
        self,
        names: Optional[Sequence[str]] = None,
        on_result: Optional[Callable[[CheckResult], None]] = None,
    ) -> List[CheckResult]:
        """Run the selected checks (all by default) in suite order.

        Numerical failures inside a check, including ones raised by numpy or
        scipy, mark it failed; the package's own input errors propagate.
        """

        registered = self.checks()
        known = [name for name, _ in registered]
        if names is not None:
            unknown = sorted(set(names) - set(known))
            if unknown:
                raise InvalidInputError(f"unknown checks: {', '.join(unknown)}")
        results: List[CheckResult] = []
        for name, check in registered:
            if names is not None and name not in names:
                continue
            started = time.perf_counter()
            try:
                passed, details = check()
                result = CheckResult(case=name, passed=bool(passed), details=details)
            except WeylLabError as exc:
                if isinstance(exc, ValueError):
                    raise
                result = CheckResult(case=name, passed=False, error=f"{type(exc).__name__}: {exc}")
            except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
                logger.warning("%s raised %s: %s", name, type(exc).__name__, exc)
                result = CheckResult(case=name, passed=False, error=f"{type(exc).__name__}: {exc}")
            logger.info(
                "%s: %s in %.2fs", name, "passed" if result.passed else "FAILED", time.perf_counter() - started
            )
            results.append(result)
            if on_result is not None:
                on_result(result)
        return results

    # -- shared data --------------------------------------------------------

    @functools.cached_property
    def _remainders(self) -> Dict[str, RemainderCurve]:
        square = make_domain(Shape.RECTANGLE, a=1.0, b=1.0)
        disk = make_domain(Shape.DISK, radius=1.0)
        return {
            "square": remainder_curve(
                exact_rectangle_spectrum(1.0, 1.0, DIRICHLET, 400.0),
                weyl_coefficients(square, DIRICHLET),
                make_lambda_grid(50.0, 400.0, 0.05),
            ),
            "disk": remainder_curve(
                exact_disk_spectrum(1.0, DIRICHLET, 120.0),
                weyl_coefficients(disk, DIRICHLET),
                make_lambda_grid(20.0, 120.0, 0.05),
            ),
        }

    @functools.cached_property
    def _singular_pair(self) -> OperatorPair:
        return build_operator_pair(_unit_square_grid(self.scale.identity_points), DIRICHLET, self.potential)

    def _kernel_spectra(self) -> Dict[str, SpectralData]:
        grid = _unit_square_grid(self.scale.kernel_points)
        return {
            "free": eigendecompose(assemble_laplacian(grid, DIRICHLET)),
            "singular": eigendecompose(assemble_schrodinger(grid, DIRICHLET, self.potential)),
        }

    # -- checks -------------------------------------------------------------

    def check_exact_counting(self) -> Tuple[bool, Dict[str, Any]]:
        spectrum = exact_rectangle_spectrum(1.0, 1.0, DIRICHLET, 60.0)
        at_twenty = counting_function(spectrum.frequencies, 20.0)
        rng = np.random.default_rng(self.seed)
        lambdas = 60.0 * (1.0 - rng.random(100))
        mismatches = [
            float(lam) for lam in lambdas if counting_function(spectrum.frequencies, lam) != _brute_force_count(lam)
        ]
        return at_twenty == 26 and not mismatches, {"N(20)": at_twenty, "mismatches": mismatches}

    def check_weyl_one_term(self) -> Tuple[bool, Dict[str, Any]]:
        fits = {
            "square": fit_remainder_exponent(self._remainders["square"], (50.0, 400.0), "R1"),
            "disk": fit_remainder_exponent(self._remainders["disk"], (20.0, 120.0), "R1"),
        }
        passed = all(0.85 <= fit.exponent <= 1.1 for fit in fits.values())
        return passed, {name: fit.exponent for name, fit in fits.items()}

    def check_weyl_two_term(self) -> Tuple[bool, Dict[str, Any]]:
        windows = {"square": (50.0, 400.0), "disk": (20.0, 120.0)}
        details: Dict[str, Any] = {}
        passed = True
        for name, window_range in windows.items():
            r1 = fit_remainder_exponent(self._remainders[name], window_range, "R1").exponent
            r2 = fit_remainder_exponent(self._remainders[name], window_range, "R2").exponent
            details[name] = {"R1": r1, "R2": r2}
            passed &= r2 < 0.9 and r2 < r1
        return passed, details

    def check_schrodinger_weyl(self) -> Tuple[bool, Dict[str, Any]]:
        grid = _unit_square_grid(self.scale.schrodinger_points)
        free = eigendecompose(assemble_laplacian(grid, DIRICHLET))
        perturbed = eigendecompose(assemble_schrodinger(grid, DIRICHLET, self.potential))
        comparison = count_difference(free, perturbed, make_lambda_grid(10.0, grid.counting_ceiling, 0.25))
        return comparison.exponent <= 1.1, comparison.to_dict()

    def check_duhamel_identity(self) -> Tuple[bool, Dict[str, Any]]:
        free_pair = build_operator_pair(
            _unit_square_grid(self.scale.identity_points), DIRICHLET, parse_potential("zero()")
        )
        singular = [duhamel_identity_check(self._singular_pair, t) for t in DUHAMEL_TIMES]
        zero = [duhamel_identity_check(free_pair, t) for t in DUHAMEL_TIMES]
        passed = all(check.relative <= 1e-8 for check in singular) and all(check.residual == 0.0 for check in zero)
        return passed, {
            "singular": [check.to_dict() for check in singular],
            "zero": [check.to_dict() for check in zero],
        }

    def check_trace_sums(self) -> Tuple[bool, Dict[str, Any]]:
        pair = self._singular_pair
        eps = 0.5
        top = 0.9 * pair.free.counting_ceiling
        lambdas = np.linspace(0.5 * top, top, 5)
        mollifier = MollifierSpec(eps)
        window_spec = WindowSpec(eps)
        worst = 0.0
        reconciled = True
        for lam in lambdas:
            sums = (
                trace_perturbation_sum(pair, lambda mu, lam=lam: np.asarray(window(window_spec, lam, mu))),
                trace_perturbation_sum(pair, lambda mu, lam=lam: smoothed_values(mollifier, lam, mu)),
            )
            worst = max(worst, *(item.residual for item in sums))
            report = case_report(pair, float(lam), eps)
            reconciled &= report.short_interval.reconciled and report.long_interval.reconciled
        return worst <= 1e-8 and reconciled, {
            "lambdas": lambdas,
            "max_residual": worst,
            "reconciled": reconciled,
        }

    def check_heat_trace(self) -> Tuple[bool, Dict[str, Any]]:
        report = heat_trace_report(1.0, 1.0, DIRICHLET, HEAT_TIMES)
        first = report.rows[0]
        ratios = [row.leading_ratio for row in report.rows]
        three_term_gap = max(abs(row.trace - row.three_term_prediction) for row in report.rows)
        passed = (
            abs(first.trace - 5.3868) <= 1e-3
            and abs(first.two_term_prediction - 5.1368) <= 1e-3
            and 0.24 <= first.trace - first.two_term_prediction <= 0.26
            and all(later > earlier for earlier, later in zip(ratios, ratios[1:]))
            and all(ratio < 1.0 for ratio in ratios)
            and three_term_gap <= 1e-3
        )
        return passed, {
            "report": report.to_dict(),
            "leading_ratios": ratios,
            "three_term_gap": three_term_gap,
        }

    def check_gaussian_bound(self) -> Tuple[bool, Dict[str, Any]]:
        details: Dict[str, Any] = {}
        passed = True
        for name, data in self._kernel_spectra().items():
            fit = fit_gaussian_bound(data, GAUSSIAN_TIMES, self.scale.kernel_samples, self.seed)
            passed &= fit.c1 > 0.0 and fit.violations == 0 and fit.samples >= self.scale.kernel_samples
            details[name] = fit.to_dict()
        grid = _unit_square_grid(self.scale.kernel_points)
        shifted = eigendecompose(normalize_shift(assemble_schrodinger(grid, DIRICHLET, self.potential)))
        long_time = check_long_time(shifted, LONG_TIMES, seed=self.seed)
        details["long_time"] = long_time.to_dict()
        return passed and long_time.nonincreasing_after_two, details

    def check_riesz_relation(self) -> Tuple[bool, Dict[str, Any]]:
        grid = _unit_square_grid(self.scale.riesz_points)
        op = normalize_shift(assemble_schrodinger(grid, DIRICHLET, self.potential))
        data = eigendecompose(op)
        kernels = ordered_map(lambda ell: riesz_kernel(data, ell), RIESZ_ELLS, self.workers)
        direct = direct_inverse_kernel(op.matrix, data.weight)
        gap = float(np.max(np.abs(kernels[0].spectral - direct)) / np.max(np.abs(direct)))
        return gap <= 1e-8, {
            "routes": [kernel.to_dict() for kernel in kernels],
            "direct_relative_difference": gap,
        }

    def check_mollifier(self) -> Tuple[bool, Dict[str, Any]]:
        rng = np.random.default_rng(self.seed)
        count = self.scale.route_triples
        triples = list(
            zip(
                rng.uniform(1.0, 40.0, count).tolist(),
                rng.uniform(0.1, 1.0, count).tolist(),
                rng.uniform(0.0, 80.0, count).tolist(),
            )
        )
        chunks = [triples[start : start + 50] for start in range(0, count, 50)]
        route = max(ordered_map(route_agreement, chunks, self.workers))
        spec = MollifierSpec(0.1)
        lam = 50.0
        doubling = decay_shell_ratio(spec, lam, 64.0)
        far = float(abs(indicator(lam, 75.0) - smoothed_values(spec, lam, 75.0)))
        fits = [check_indicator_decay(spec, lam, order, decay_grid(lam, spec.epsilon)) for order in (2, 4)]
        grid = _unit_square_grid(self.scale.kernel_points)
        data = eigendecompose(assemble_laplacian(grid, DIRICHLET))
        sweep = eigenfunction_bound_sweep(data, make_lambda_grid(10.0, grid.counting_ceiling, 0.25))
        passed = route <= 1e-6 and doubling >= 8.0 and far <= 1e-6 and sweep.max_ratio <= 1.0
        return passed, {
            "route_agreement": route,
            "doubling_ratio": doubling,
            "far_deviation": far,
            "decay": [fit.to_dict() for fit in fits],
            "eigenfunction_max_ratio": sweep.max_ratio,
        }

    def check_littlewood_paley(self) -> Tuple[bool, Dict[str, Any]]:
        decomp = DyadicDecomposition(MollifierSpec(0.25))
        lam = 20.0
        partition_gap = max(
            abs(dyadic_partition(decomp, float(s), 12).total - 1.0) for s in np.geomspace(1e-3, 1e3, 200)
        )
        support_exact = True
        for ell in (0, 1, 2):
            width = math.ldexp(1.0, ell)
            for offset in (0.6, 1.0, 1.5):
                values = lp_symbols(decomp, lam, lam + offset * width, lam, ell, 1)
                support_exact &= values.r != 0.0
            for offset in (0.25, 0.5, 2.0, 3.0):
                values = lp_symbols(decomp, lam, lam + offset * width, lam, ell, 1)
                support_exact &= values.r == 0.0 and values.m == 0.0
        cases = [(ell, nu, sign) for ell in (0, 1, 2) for nu in (0, 1) for sign in (-1, 1)]
        certificates = [
            cert
            for pair in ordered_map(lambda case: certify_symbol_bounds(decomp, lam, *case), cases, self.workers)
            for cert in pair
        ]
        certificates += [certify_m0_bound(decomp, lam, nu, sign) for nu in (0, 1) for sign in (-1, 1)]
        finite = all(math.isfinite(cert.constant) and math.isfinite(cert.refined) for cert in certificates)
        stable = all(cert.stable for cert in certificates)
        passed = partition_gap <= 1e-12 and support_exact and finite and stable
        return passed, {
            "partition_gap": partition_gap,
            "support_exact": support_exact,
            "certificates": [cert.to_dict() for cert in certificates],
        }

    def check_short_interval(self) -> Tuple[bool, Dict[str, Any]]:
        spectrum = exact_rectangle_spectrum(1.0, 1.0, DIRICHLET, 202.0)
        lambdas = make_lambda_grid(20.0, 200.0, 0.05)
        ratios = {eps: short_interval_sweep(spectrum, lambdas, eps).max_ratio for eps in SHORT_EPSILONS}
        return all(ratio <= 3.0 for ratio in ratios.values()), {str(eps): ratio for eps, ratio in ratios.items()}


def summarize(results: Sequence[CheckResult]) -> Dict[str, Any]:
    return {
        "passed": all(result.passed for result in results),
        "failed": [result.case for result in results if not result.passed],
        "checks": [result.to_dict() for result in results],
    }
