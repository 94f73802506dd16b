"""Weyl coefficients, remainder curves, exponent fits and short-interval counts."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
import scipy.special

from .errors import InvalidInputError, RangeError
from .geometry import BoundaryCondition, BoundaryKind, DomainSpec, Grid, Shape
from .operators import assemble_laplacian
from .report import Curve, emit_svg, write_csv
from .spectrum import (
    FrequencySource,
    counting_function,
    eigendecompose,
    frequency_view,
)
from .types import _require_positive, frozen_array

logger = logging.getLogger(__name__)

BLOCKS_PER_OCTAVE = 4
MIN_FIT_BLOCKS = 4

CAVEAT_ROBIN = "robin_c1_reported_as_neumann_value"
CAVEAT_CORNERS = "rectangle_corners_violate_smooth_boundary"


def ball_volume(n: int) -> float:
    """Volume of the unit ball in ``R^n``."""

    return math.pi ** (n / 2.0) / float(scipy.special.gamma(n / 2.0 + 1.0))


@dataclass(frozen=True)
class WeylCoefficients:
    n: int
    c0: float
    c1: float
    omega_n: float
    omega_n_minus_1: float
    area: float
    perimeter: float
    bc: str
    caveats: Tuple[str, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "c0": self.c0,
            "c1": self.c1,
            "omega_n": self.omega_n,
            "omega_n_minus_1": self.omega_n_minus_1,
            "area": self.area,
            "perimeter": self.perimeter,
            "bc": self.bc,
            "caveats": list(self.caveats),
        }


def weyl_coefficients(
    domain: DomainSpec, bc: BoundaryCondition, n: int | None = None
) -> WeylCoefficients:
    """One- and two-term Weyl coefficients.

    ``c0 = (2π)^-n ω_n |M|`` and ``c1 = ∓ (1/4) (2π)^(1-n) ω_{n-1} |∂M|`` with the
    minus sign for Dirichlet and the plus sign for Neumann. Robin reports the
    Neumann value and records a caveat.
    """

    n = domain.dimension if n is None else n
    if n < 2:
        raise InvalidInputError(f"Weyl coefficients need n >= 2, got {n}")
    omega_n = ball_volume(n)
    omega_low = ball_volume(n - 1)
    c0 = (2.0 * math.pi) ** (-n) * omega_n * domain.area
    magnitude = 0.25 * (2.0 * math.pi) ** (1 - n) * omega_low * domain.perimeter
    caveats: List[str] = []
    if bc.kind is BoundaryKind.DIRICHLET:
        c1 = -magnitude
    else:
        c1 = magnitude
        if bc.kind is BoundaryKind.ROBIN:
            caveats.append(CAVEAT_ROBIN)
    if domain.shape is Shape.RECTANGLE:
        caveats.append(CAVEAT_CORNERS)
    return WeylCoefficients(
        n=n,
        c0=c0,
        c1=c1,
        omega_n=omega_n,
        omega_n_minus_1=omega_low,
        area=domain.area,
        perimeter=domain.perimeter,
        bc=bc.label(),
        caveats=tuple(caveats),
    )


def _lambda_grid(lambdas: Sequence[float]) -> np.ndarray:
    values = np.asarray(lambdas, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise InvalidInputError("lambda grid must be a nonempty 1-D sequence")
    if np.any(values <= 0.0) or np.any(np.diff(values) <= 0.0):
        raise InvalidInputError("lambda grid must be positive and strictly increasing")
    return values


def _check_ceiling(lambdas: np.ndarray, ceiling: float, what: str) -> None:
    if lambdas[-1] > ceiling * (1.0 + 1e-12):
        raise RangeError(f"{what}: lambda={lambdas[-1]!r} beyond the valid range {ceiling!r}")


def make_lambda_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive arithmetic grid ``start, start + step, ..., <= stop``."""

    start = _require_positive(start, "lambda-min")
    step = _require_positive(step, "lambda-step")
    if stop < start:
        raise InvalidInputError(f"lambda-max {stop!r} is below lambda-min {start!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count, dtype=float)


@dataclass(frozen=True, eq=False)
class RemainderCurve:
    """``R1 = N - c0 λ^n`` and ``R2 = R1 - c1 λ^(n-1)`` with normalized forms."""

    lambdas: np.ndarray
    counts: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    r1_norm: np.ndarray
    r2_norm: np.ndarray
    coefficients: WeylCoefficients

    def rows(self) -> List[Tuple[float, int, float, float, float, float]]:
        return [
            (float(lam), int(count), float(a), float(b), float(c), float(d))
            for lam, count, a, b, c, d in zip(
                self.lambdas, self.counts, self.r1, self.r2, self.r1_norm, self.r2_norm
            )
        ]

    def write_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(path, ("lambda", "N", "R1", "R2", "R1_norm", "R2_norm"), self.rows())

    def write_svg(self, path: Union[str, Path], title: str = "Weyl remainders") -> Path:
        curves = [
            Curve.of("R1 / λ^(n-1)", self.lambdas, self.r1_norm),
            Curve.of("R2 / λ^(n-1)", self.lambdas, self.r2_norm),
        ]
        return emit_svg(path, curves, title=title, xlabel="λ", ylabel="remainder / λ^(n-1)", reference=0.0)


def remainder_curve(
    source: FrequencySource, coefficients: WeylCoefficients, lambdas: Sequence[float]
) -> RemainderCurve:
    """Remainders of the one- and two-term laws on a λ grid."""

    frequencies, ceiling = frequency_view(source)
    grid = _lambda_grid(lambdas)
    _check_ceiling(grid, ceiling, "remainder_curve")
    n = coefficients.n
    counts = counting_function(frequencies, grid)
    r1 = counts - coefficients.c0 * grid**n
    r2 = r1 - coefficients.c1 * grid ** (n - 1)
    scale = grid ** (n - 1)
    return RemainderCurve(
        lambdas=frozen_array(grid),
        counts=frozen_array(counts, dtype=int),
        r1=frozen_array(r1),
        r2=frozen_array(r2),
        r1_norm=frozen_array(r1 / scale),
        r2_norm=frozen_array(r2 / scale),
        coefficients=coefficients,
    )


@dataclass(frozen=True, eq=False)
class ExponentFit:
    exponent: float
    intercept: float
    residual: float
    block_centers: np.ndarray
    block_means: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {
            "exponent": self.exponent,
            "intercept": self.intercept,
            "residual": self.residual,
            "blocks": int(self.block_centers.size),
        }


def _block_means(
    lambdas: np.ndarray, magnitudes: np.ndarray, lo: float, hi: float
) -> Tuple[np.ndarray, np.ndarray]:
    octaves = math.log2(hi / lo)
    count = max(int(round(octaves * BLOCKS_PER_OCTAVE)), 1)
    edges = lo * (hi / lo) ** (np.arange(count + 1) / count)
    edges[-1] = hi
    centers: List[float] = []
    means: List[float] = []
    for left, right in zip(edges[:-1], edges[1:]):
        inside = (lambdas >= left) & (lambdas < right if right < hi else lambdas <= right)
        if np.any(inside):
            centers.append(math.sqrt(left * right))
            means.append(float(np.mean(magnitudes[inside])))
    return np.asarray(centers), np.asarray(means)


def fit_block_exponent(
    lambdas: Sequence[float],
    values: Sequence[float],
    window: Tuple[float, float],
    min_blocks: int = MIN_FIT_BLOCKS,
) -> ExponentFit:
    """Least-squares slope of ``log mean|values|`` against ``log λ`` over geometric blocks.

    Blocks are a quarter octave wide; blocks whose mean is zero are dropped.
    """

    lo, hi = float(window[0]), float(window[1])
    if not 0.0 < lo < hi:
        raise InvalidInputError(f"degenerate fit window {window!r}")
    grid = np.asarray(lambdas, dtype=float)
    magnitudes = np.abs(np.asarray(values, dtype=float))
    centers, means = _block_means(grid, magnitudes, lo, hi)
    keep = means > 0.0
    centers, means = centers[keep], means[keep]
    if centers.size < min_blocks:
        raise InvalidInputError(
            f"fit window {window!r} has {centers.size} usable blocks, need {min_blocks}"
        )
    x, y = np.log(centers), np.log(means)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return ExponentFit(
        exponent=float(slope),
        intercept=float(intercept),
        residual=residual,
        block_centers=frozen_array(centers),
        block_means=frozen_array(means),
    )


def fit_remainder_exponent(
    curve: RemainderCurve, window: Tuple[float, float], which: str = "R1"
) -> ExponentFit:
    """Growth exponent of block-averaged ``|R1|`` or ``|R2|`` over ``window``."""

    if which not in ("R1", "R2"):
        raise InvalidInputError(f"which must be 'R1' or 'R2', got {which!r}")
    values = curve.r1 if which == "R1" else curve.r2
    fit = fit_block_exponent(curve.lambdas, values, window)
    logger.debug("%s exponent over %s: %.6f", which, window, fit.exponent)
    return fit


def short_interval_count(source: FrequencySource, lam: float, eps: float) -> int:
    """``#{k : τ_k ∈ [λ, λ + ε]}`` (closed interval, multiplicity counted)."""

    if eps < 0.0:
        raise InvalidInputError(f"eps must be >= 0, got {eps!r}")
    frequencies, _ = frequency_view(source)
    upper = np.searchsorted(frequencies, lam + eps, side="right")
    lower = np.searchsorted(frequencies, lam, side="left")
    return int(upper - lower)


@dataclass(frozen=True, eq=False)
class ShortIntervalSweep:
    lambdas: np.ndarray
    counts: np.ndarray
    ratios: np.ndarray
    eps: float

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios))

    def to_dict(self) -> Dict[str, Any]:
        return {"eps": self.eps, "max_ratio": self.max_ratio, "points": int(self.lambdas.size)}


def short_interval_sweep(
    source: FrequencySource, lambdas: Sequence[float], eps: float, n: int = 2
) -> ShortIntervalSweep:
    """Counts in ``[λ, λ+ε]`` against ``ε λ^(n-1) + λ^(n-3/2)`` across a sweep."""

    eps = _require_positive(eps, "eps")
    frequencies, ceiling = frequency_view(source)
    grid = _lambda_grid(lambdas)
    _check_ceiling(grid + eps, ceiling, "short_interval_sweep")
    upper = np.searchsorted(frequencies, grid + eps, side="right")
    lower = np.searchsorted(frequencies, grid, side="left")
    counts = upper - lower
    ratios = counts / (eps * grid ** (n - 1) + grid ** (n - 1.5))
    return ShortIntervalSweep(
        lambdas=frozen_array(grid),
        counts=frozen_array(counts, dtype=int),
        ratios=frozen_array(ratios),
        eps=eps,
    )


@dataclass(frozen=True, eq=False)
class CountDifference:
    """``N_V(λ) - N^0(λ)`` with the fitted bound ``|difference| <= C λ``."""

    lambdas: np.ndarray
    free_counts: np.ndarray
    perturbed_counts: np.ndarray
    difference: np.ndarray
    constant: float
    exponent: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "constant": self.constant,
            "exponent": self.exponent,
            "max_abs_difference": int(np.max(np.abs(self.difference))),
            "lambda_min": float(self.lambdas[0]),
            "lambda_max": float(self.lambdas[-1]),
        }

    def write_csv(self, path: Union[str, Path]) -> Path:
        rows = zip(self.lambdas, self.free_counts, self.perturbed_counts, self.difference)
        return write_csv(
            path,
            ("lambda", "N_free", "N_V", "difference"),
            [(float(a), int(b), int(c), int(d)) for a, b, c, d in rows],
        )


def count_difference(
    free: FrequencySource, perturbed: FrequencySource, lambdas: Sequence[float]
) -> CountDifference:
    """Compare Schrödinger and free counting functions on the same grid.

    The growth exponent is fitted on quarter-octave blocks of the nonzero
    differences; with fewer than two such blocks the difference is bounded and
    the exponent is reported as 0.
    """

    free_values, free_ceiling = frequency_view(free)
    perturbed_values, perturbed_ceiling = frequency_view(perturbed)
    grid = _lambda_grid(lambdas)
    _check_ceiling(grid, min(free_ceiling, perturbed_ceiling), "count_difference")
    free_counts = counting_function(free_values, grid)
    perturbed_counts = counting_function(perturbed_values, grid)
    difference = perturbed_counts - free_counts
    constant = float(np.max(np.abs(difference) / grid))
    try:
        exponent = fit_block_exponent(grid, difference, (grid[0], grid[-1]), min_blocks=2).exponent
    except InvalidInputError:
        exponent = 0.0
    logger.debug("count difference: C=%.6g exponent=%.4f", constant, exponent)
    return CountDifference(
        lambdas=frozen_array(grid),
        free_counts=frozen_array(free_counts, dtype=int),
        perturbed_counts=frozen_array(perturbed_counts, dtype=int),
        difference=frozen_array(difference, dtype=int),
        constant=constant,
        exponent=float(exponent),
    )


@dataclass(frozen=True, eq=False)
class RobinSandwich:
    lambdas: np.ndarray
    dirichlet: np.ndarray
    robin: np.ndarray
    neumann: np.ndarray
    sigma: float

    @property
    def holds(self) -> bool:
        return bool(np.all(self.dirichlet <= self.robin) and np.all(self.robin <= self.neumann))

    def to_dict(self) -> Dict[str, Any]:
        return {"sigma": self.sigma, "holds": self.holds, "points": int(self.lambdas.size)}


def robin_sandwich(grid: Grid, sigma: float, lambdas: Sequence[float]) -> RobinSandwich:
    """Check ``N_D(λ) <= N_R(λ) <= N_N(λ)`` on the discrete spectra of one grid."""

    values = _lambda_grid(lambdas)
    _check_ceiling(values, grid.counting_ceiling, "robin_sandwich")
    counts = {}
    for label, bc in (
        ("dirichlet", BoundaryCondition(BoundaryKind.DIRICHLET)),
        ("robin", BoundaryCondition(BoundaryKind.ROBIN, sigma)),
        ("neumann", BoundaryCondition(BoundaryKind.NEUMANN)),
    ):
        data = eigendecompose(assemble_laplacian(grid, bc))
        counts[label] = frozen_array(counting_function(data.frequencies, values), dtype=int)
    return RobinSandwich(
        lambdas=frozen_array(values),
        dirichlet=counts["dirichlet"],
        robin=counts["robin"],
        neumann=counts["neumann"],
        sigma=sigma,
    )
