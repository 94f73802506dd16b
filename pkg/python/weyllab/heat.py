"""Heat kernels and traces by eigenexpansion, Gaussian-bound fits, Riesz kernels."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import AccuracyError, FitFailureError, InvalidInputError
from .geometry import BoundaryCondition, BoundaryKind, pairwise_distances
from .potentials import gauss_legendre
from .report import write_csv
from .spectrum import FrequencySource, SpectralData, exact_rectangle_spectrum, frequency_view
from .types import frozen_array

logger = logging.getLogger(__name__)

TRACE_TAIL = 1e-12
SHIFTED_FLOOR = 1.0 - 1e-9
RIESZ_TOL = 1e-6
RIESZ_PANELS = 60
RIESZ_ORDER = 16
LAGUERRE_ORDER = 16
# Each of the four right-angle corners of a rectangle adds 1/16 to the heat trace.
RECTANGLE_CORNER_TERM = 0.25


def _require_time(t: float) -> float:
    t = float(t)
    if not t > 0.0 or not math.isfinite(t):
        raise InvalidInputError(f"t must be positive, got {t!r}")
    return t


def heat_kernel(data: SpectralData, t: float, x: int, y: int) -> float:
    """``K_t(x, y) = Σ_k exp(-t μ_k) e_k(x) e_k(y)``."""

    t = _require_time(t)
    for node in (x, y):
        if not 0 <= node < data.node_count:
            raise InvalidInputError(f"node {node} outside 0..{data.node_count - 1}")
    decay = np.exp(-t * data.eigenvalues)
    return float(np.sum(decay * (data.eigenvectors[x] * data.eigenvectors[y])))


def heat_kernel_matrix(data: SpectralData, t: float) -> np.ndarray:
    """All node pairs at once."""

    t = _require_time(t)
    decay = np.exp(-t * data.eigenvalues)
    return (data.eigenvectors * decay) @ data.eigenvectors.T


def heat_kernel_pairs(
    data: SpectralData, t: float, first: np.ndarray, second: np.ndarray
) -> np.ndarray:
    decay = np.exp(-_require_time(t) * data.eigenvalues)
    return np.sum((data.eigenvectors[first] * decay) * data.eigenvectors[second], axis=1)


def heat_trace(source: FrequencySource, t: float) -> float:
    """``Σ_k exp(-t τ_k²)``."""

    t = _require_time(t)
    frequencies, _ = frequency_view(source)
    return float(math.fsum(np.exp(-t * frequencies**2)))


def trace_cutoff(area: float, t: float, tail: float = TRACE_TAIL) -> float:
    """Frequency beyond which the Gaussian tail of the trace is below ``tail``."""

    return math.sqrt(math.log(2.0 * (area / (4.0 * math.pi * t) + 1.0) / tail) / t)


def heat_trace_exact(a: float, b: float, bc: BoundaryCondition, t: float) -> float:
    """Heat trace of the exact rectangle spectrum with a tail below ``1e-12``."""

    t = _require_time(t)
    cutoff = trace_cutoff(a * b, t)
    return heat_trace(exact_rectangle_spectrum(a, b, bc, cutoff), t)


@dataclass(frozen=True)
class HeatTraceRow:
    t: float
    trace: float
    leading_term: float
    two_term_prediction: float
    three_term_prediction: float

    @property
    def leading_ratio(self) -> float:
        return self.trace / self.leading_term


@dataclass(frozen=True)
class HeatTraceReport:
    a: float
    b: float
    bc: str
    rows: Tuple[HeatTraceRow, ...]
    caveat: str = "corner term of 1/4 is specific to rectangles"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a": self.a,
            "b": self.b,
            "bc": self.bc,
            "caveat": self.caveat,
            "rows": [
                {
                    "t": row.t,
                    "trace": row.trace,
                    "leading_term": row.leading_term,
                    "two_term_prediction": row.two_term_prediction,
                    "three_term_prediction": row.three_term_prediction,
                    "observed_minus_two_term": row.trace - row.two_term_prediction,
                    "leading_ratio": row.leading_ratio,
                }
                for row in self.rows
            ],
        }

    def write_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(
            path,
            ("t", "trace", "leading_term", "two_term_prediction"),
            [(row.t, row.trace, row.leading_term, row.two_term_prediction) for row in self.rows],
        )


def heat_trace_report(
    a: float, b: float, bc: BoundaryCondition, times: Sequence[float]
) -> HeatTraceReport:
    """Exact rectangle heat traces against the short-time expansion.

    The boundary term enters with a minus sign for Dirichlet and a plus sign
    for Neumann; the corner term is the same for both.
    """

    if bc.kind is BoundaryKind.ROBIN:
        raise InvalidInputError("heat_trace_report needs Dirichlet or Neumann")
    area, perimeter = a * b, 2.0 * (a + b)
    sign = -1.0 if bc.kind is BoundaryKind.DIRICHLET else 1.0
    rows: List[HeatTraceRow] = []
    for t in times:
        t = _require_time(t)
        leading = area / (4.0 * math.pi * t)
        two_term = leading + sign * perimeter / (8.0 * math.sqrt(math.pi * t))
        rows.append(
            HeatTraceRow(
                t=t,
                trace=heat_trace_exact(a, b, bc, t),
                leading_term=leading,
                two_term_prediction=two_term,
                three_term_prediction=two_term + RECTANGLE_CORNER_TERM,
            )
        )
    return HeatTraceReport(a=a, b=b, bc=bc.label(), rows=tuple(rows))


# ---------------------------------------------------------------------------
# Gaussian and long-time bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianFit:
    """Certified ``|K_t(x,y)| <= C t^(-n/2) exp(-c1 d(x,y)² / t)`` on a sample."""

    C: float
    c1: float
    t_min: float
    t_max: float
    samples: int
    violations: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "C": self.C,
            "c1": self.c1,
            "t_min": self.t_min,
            "t_max": self.t_max,
            "samples": self.samples,
            "violations": self.violations,
        }


@dataclass(frozen=True, eq=False)
class KernelSample:
    """Heat-kernel values at ``(t, x, y)`` triples with their distances."""

    times: np.ndarray
    distances: np.ndarray
    values: np.ndarray

    @property
    def size(self) -> int:
        return int(self.values.size)


def sample_pairs(
    node_count: int, pair_count: int, seed: int = 0
) -> Tuple[np.ndarray, np.ndarray]:
    """Node pairs: every diagonal pair, nearest-index neighbours, and random far pairs."""

    rng = np.random.default_rng(seed)
    diagonal = np.arange(node_count)
    neighbours = rng.integers(0, max(node_count - 1, 1), size=max(pair_count // 4, 1))
    extra = max(pair_count - node_count - neighbours.size, 0)
    first = np.concatenate([diagonal, neighbours, rng.integers(0, node_count, size=extra)])
    second = np.concatenate(
        [diagonal, np.minimum(neighbours + 1, node_count - 1), rng.integers(0, node_count, size=extra)]
    )
    return first, second


def sample_kernel(
    data: SpectralData, times: Sequence[float], samples: int = 10_000, seed: int = 0
) -> KernelSample:
    """Evaluate the heat kernel on at least ``samples`` ``(t, x, y)`` triples."""

    if data.grid is None:
        raise InvalidInputError("kernel sampling needs spectral data with a grid")
    grid_times = np.asarray([_require_time(t) for t in times])
    if grid_times.size == 0:
        raise InvalidInputError("time grid must be nonempty")
    per_time = int(math.ceil(samples / grid_times.size))
    first, second = sample_pairs(data.node_count, per_time, seed)
    distances = pairwise_distances(data.grid.nodes, first, second)
    values = np.concatenate([heat_kernel_pairs(data, t, first, second) for t in grid_times])
    return KernelSample(
        times=frozen_array(np.repeat(grid_times, first.size)),
        distances=frozen_array(np.tile(distances, grid_times.size)),
        values=frozen_array(values),
    )


def _log_constant(sample: KernelSample, c1: float, n: int) -> float:
    with np.errstate(divide="ignore"):
        logs = (
            np.log(np.abs(sample.values))
            + 0.5 * n * np.log(sample.times)
            + c1 * sample.distances**2 / sample.times
        )
    return float(np.max(logs))


def gaussian_constant(sample: KernelSample, c1: float, n: int = 2) -> float:
    """Smallest ``C`` certifying the Gaussian bound with rate ``c1`` on ``sample``."""

    return math.exp(_log_constant(sample, c1, n))


def count_violations(sample: KernelSample, C: float, c1: float, n: int = 2) -> int:
    bound = C * sample.times ** (-0.5 * n) * np.exp(-c1 * sample.distances**2 / sample.times)
    return int(np.count_nonzero(np.abs(sample.values) > bound * (1.0 + 1e-12)))


def fit_gaussian_bound(
    data: SpectralData,
    times: Sequence[float],
    samples: int = 10_000,
    seed: int = 0,
    c1_range: Tuple[float, float] = (1e-3, 10.0),
) -> GaussianFit:
    """Certify Gaussian-bound constants on a sample of ``(t, x, y)`` triples.

    The rate ``c1`` minimizes the mass ``C(c1) (π / c1)^(n/2)`` of the bounding
    Gaussian (bounded scalar search in ``log c1``); ``C`` is then the smallest
    constant that certifies every sample.

    Raises:
        InvalidInputError: a time lies outside ``(0, 1]``.
        FitFailureError: no positive rate certifies the sample.
    """

    if any(not 0.0 < t <= 1.0 for t in times):
        raise InvalidInputError("Gaussian-bound times must lie in (0, 1]")
    n = data.grid.domain.dimension if data.grid is not None else 2
    sample = sample_kernel(data, times, samples, seed)

    def objective(log_c1: float) -> float:
        c1 = math.exp(log_c1)
        return _log_constant(sample, c1, n) - 0.5 * n * math.log(c1)

    lo, hi = (math.log(value) for value in c1_range)
    result = scipy.optimize.minimize_scalar(objective, bounds=(lo, hi), method="bounded")
    c1 = math.exp(float(result.x))
    C = gaussian_constant(sample, c1, n)
    if not (math.isfinite(C) and C > 0.0 and c1 > 0.0):
        raise FitFailureError(f"no certified Gaussian bound (C={C!r}, c1={c1!r})")
    violations = count_violations(sample, C, c1, n)
    logger.debug("Gaussian fit: C=%.6g c1=%.6g over %d samples", C, c1, sample.size)
    return GaussianFit(
        C=C,
        c1=c1,
        t_min=float(min(times)),
        t_max=float(max(times)),
        samples=sample.size,
        violations=violations,
    )


def _require_shifted(data: SpectralData, what: str) -> None:
    if data.eigenvalues.size and data.eigenvalues[0] < SHIFTED_FLOOR:
        raise InvalidInputError(
            f"{what} needs a spectrum bounded below by one; lowest eigenvalue {data.eigenvalues[0]!r}"
        )


@dataclass(frozen=True, eq=False)
class LongTimeReport:
    times: np.ndarray
    values: np.ndarray
    nonincreasing_after_two: bool
    crude_bound_holds: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "times": self.times,
            "values": self.values,
            "nonincreasing_after_two": self.nonincreasing_after_two,
            "crude_bound_holds": self.crude_bound_holds,
        }


def check_long_time(
    data: SpectralData, times: Sequence[float], samples: int = 2_000, seed: int = 0
) -> LongTimeReport:
    """``max |K_t(x,y)| e^(t/2)`` over sampled pairs for ``t`` in ``(1, 20]``.

    Every diagonal pair is sampled, so the maximum is attained on the diagonal
    and is nonincreasing once the spectrum is bounded below by one.
    """

    _require_shifted(data, "check_long_time")
    grid_times = np.asarray(sorted(_require_time(t) for t in times))
    if grid_times.size == 0 or grid_times[0] <= 1.0 or grid_times[-1] > 20.0:
        raise InvalidInputError("long-time check needs times in (1, 20]")
    first, second = sample_pairs(data.node_count, samples, seed)
    diagonal = first == second
    values = []
    crude = True
    for t in grid_times:
        kernel = heat_kernel_pairs(data, t, first, second)
        values.append(float(np.max(np.abs(kernel))) * math.exp(0.5 * t))
        crude &= bool(np.all(kernel[diagonal] <= math.exp(-t * data.eigenvalues[0]) / data.weight * (1.0 + 1e-12)))
    values_array = np.asarray(values)
    late = values_array[grid_times >= 2.0]
    nonincreasing = bool(np.all(np.diff(late) <= 1e-12 * np.abs(late[:-1]))) if late.size > 1 else True
    return LongTimeReport(
        times=frozen_array(grid_times),
        values=frozen_array(values_array),
        nonincreasing_after_two=nonincreasing,
        crude_bound_holds=crude,
    )


# ---------------------------------------------------------------------------
# Riesz kernels
# ---------------------------------------------------------------------------


def _heat_integral_weights(eigenvalues: np.ndarray, ell: int) -> np.ndarray:
    """``(1/ℓ!) ∫_0^∞ t^ℓ e^(-t μ) dt`` per eigenvalue by quadrature.

    Geometric Gauss-Legendre panels cover ``(0, 1]``; the tail over ``(1, ∞)``
    is ``e^(-μ)/μ ∫_0^∞ (1 + v/μ)^ℓ e^(-v) dv`` by Gauss-Laguerre.
    """

    t, w = gauss_legendre(RIESZ_ORDER)
    scales = 2.0 ** -np.arange(RIESZ_PANELS, dtype=float)
    nodes = (scales[:, None] * ((3.0 + t) / 4.0)[None, :]).ravel()
    weights = (scales[:, None] * (w / 4.0)[None, :]).ravel()
    mu = eigenvalues[:, None]
    short = np.sum(weights * nodes**ell * np.exp(-mu * nodes), axis=1)
    v, wv = np.polynomial.laguerre.laggauss(LAGUERRE_ORDER)
    tail = np.exp(-eigenvalues) / eigenvalues * np.sum(wv * (1.0 + v[None, :] / mu) ** ell, axis=1)
    return (short + tail) / math.factorial(ell)


@dataclass(frozen=True, eq=False)
class RieszKernel:
    """Two computations of the kernel of ``H^(-1-ℓ)``."""

    ell: int
    spectral: np.ndarray
    quadrature: np.ndarray
    max_difference: float
    relative_difference: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ell": self.ell,
            "max_difference": self.max_difference,
            "relative_difference": self.relative_difference,
            "size": int(self.spectral.shape[0]),
            "note": "pointwise kernel bounds for n=2 are out of numeric scope",
        }


def riesz_kernel(data: SpectralData, ell: int, tolerance: float = RIESZ_TOL) -> RieszKernel:
    """Kernel of ``H^(-1-ℓ)`` spectrally and through the heat-semigroup integral.

    Raises:
        InvalidInputError: ``ell`` is negative or the spectrum is not shifted.
        AccuracyError: the two routes differ by more than ``tolerance`` (relative).
    """

    if isinstance(ell, bool) or not isinstance(ell, int) or ell < 0:
        raise InvalidInputError(f"ell must be a nonnegative int, got {ell!r}")
    _require_shifted(data, "riesz_kernel")
    mu = data.eigenvalues
    vectors = data.eigenvectors
    spectral = (vectors * mu ** (-1.0 - ell)) @ vectors.T
    quadrature = (vectors * _heat_integral_weights(mu, ell)) @ vectors.T
    difference = float(np.max(np.abs(spectral - quadrature)))
    scale = float(np.max(np.abs(spectral)))
    relative = difference / scale if scale > 0.0 else difference
    if relative > tolerance:
        raise AccuracyError(f"Riesz routes disagree for ell={ell}: relative difference {relative!r}")
    logger.debug("Riesz kernel ell=%d: relative route difference %.3g", ell, relative)
    return RieszKernel(
        ell=ell,
        spectral=frozen_array(spectral),
        quadrature=frozen_array(quadrature),
        max_difference=difference,
        relative_difference=relative,
    )


def direct_inverse_kernel(matrix: np.ndarray, weight: float) -> np.ndarray:
    """Kernel of ``H^-1`` from a dense linear solve, in the weighted normalization."""

    return scipy.linalg.solve(matrix, np.eye(matrix.shape[0]), assume_a="sym") / weight
