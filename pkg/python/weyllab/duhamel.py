"""Finite-dimensional Duhamel and trace perturbation identities.

For ``H_V = H^0 + diag(V̄)`` on one lattice, with eigenpairs ``(λ_j², e_j⁰)``
and ``(τ_k², e_{τ_k})``, the overlaps

    A[j, k] = h² Σ_x e_j⁰(x) e_{τ_k}(x)
    B[j, k] = h² Σ_x e_j⁰(x) V̄(x) e_{τ_k}(x) = (τ_k² - λ_j²) A[j, k]

turn every difference ``g(P_V) - g(P^0)`` into a double sum with divided
difference coefficients. The identities are exact, so their residuals are
floating-point noise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize

from .errors import AccuracyError, InvalidInputError, InvalidPairError, RangeError
from .geometry import BoundaryCondition, Grid
from .multipliers import MollifierSpec, WindowSpec, smoothed_values, window
from .operators import assemble_laplacian, assemble_schrodinger, shift_pair
from .potentials import DEFAULT_ORDER, PotentialSpec
from .spectrum import DEFAULT_MAX_SIZE, SpectralData, eigendecompose
from .types import frozen_array

logger = logging.getLogger(__name__)

COINCIDENCE_TOL = 1e-8
RECONCILE_TOL = 1e-10
RAPID_DECAY_SIGMA = 2.0

Multiplier = Callable[[np.ndarray], np.ndarray]


def _same_lattice(free: SpectralData, perturbed: SpectralData) -> None:
    if free.grid is None or perturbed.grid is None:
        raise InvalidPairError("both spectra must carry their grid")
    g0, g1 = free.grid, perturbed.grid
    if g0.h != g1.h or g0.nx != g1.nx or g0.ny != g1.ny:
        raise InvalidPairError("spectra come from different grids")
    if free.shift != perturbed.shift:
        raise InvalidPairError(f"spectra carry different shifts ({free.shift!r} != {perturbed.shift!r})")


@dataclass(frozen=True, eq=False)
class OperatorPair:
    """Free and perturbed spectra on one lattice with their overlap matrices."""

    free: SpectralData
    perturbed: SpectralData
    potential_diagonal: np.ndarray
    overlap: np.ndarray
    v_overlap: np.ndarray

    @classmethod
    def from_spectra(
        cls, free: SpectralData, perturbed: SpectralData, potential_diagonal: Sequence[float]
    ) -> "OperatorPair":
        _same_lattice(free, perturbed)
        diagonal = np.asarray(potential_diagonal, dtype=float)
        if diagonal.shape != (free.node_count,):
            raise InvalidInputError("potential diagonal must have one entry per node")
        weight = free.weight
        e0 = free.eigenvectors
        ev = perturbed.eigenvectors
        return cls(
            free=free,
            perturbed=perturbed,
            potential_diagonal=frozen_array(diagonal),
            overlap=frozen_array(weight * (e0.T @ ev)),
            v_overlap=frozen_array(weight * (e0.T @ (diagonal[:, None] * ev))),
        )

    @property
    def grid(self) -> Grid:
        assert self.free.grid is not None
        return self.free.grid

    def orthogonality_error(self) -> float:
        """``max |AᵀA - I|``."""

        gram = self.overlap.T @ self.overlap
        return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))

    def intertwining_error(self) -> float:
        """``max |B - (A diag(τ²) - diag(λ²) A)|``."""

        a = self.overlap
        expected = a * self.perturbed.eigenvalues[None, :] - self.free.eigenvalues[:, None] * a
        return float(np.max(np.abs(self.v_overlap - expected)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "size": self.free.size,
            "shift": self.free.shift,
            "orthogonality_error": self.orthogonality_error(),
            "intertwining_error": self.intertwining_error(),
            "potential_sup": float(np.max(np.abs(self.potential_diagonal))),
        }


def build_operator_pair(
    grid: Grid,
    bc: BoundaryCondition,
    potential: PotentialSpec,
    order: int = DEFAULT_ORDER,
    max_size: int = DEFAULT_MAX_SIZE,
) -> OperatorPair:
    """Assemble ``H^0`` and ``H_V``, apply one common shift and diagonalize both."""

    free, perturbed = shift_pair(
        assemble_laplacian(grid, bc), assemble_schrodinger(grid, bc, potential, order)
    )
    pair = OperatorPair.from_spectra(
        eigendecompose(free, max_size),
        eigendecompose(perturbed, max_size),
        perturbed.potential_diagonal,
    )
    logger.debug(
        "operator pair on %d nodes: orthogonality %.3g, intertwining %.3g",
        grid.size,
        pair.orthogonality_error(),
        pair.intertwining_error(),
    )
    return pair


# ---------------------------------------------------------------------------
# Wave kernels and the Duhamel identity
# ---------------------------------------------------------------------------


def wave_kernel(data: SpectralData, t: float) -> np.ndarray:
    """Kernel of ``cos(tP) = Σ_k cos(tτ_k) e_k e_kᵀ``."""

    vectors = data.eigenvectors
    return (vectors * np.cos(t * data.frequencies)) @ vectors.T


def _coefficients(lams: np.ndarray, taus: np.ndarray, t: float, tol: float) -> np.ndarray:
    lam = lams[:, None]
    tau = taus[None, :]
    diff = lam - tau
    total = lam + tau
    coincide = np.abs(diff) <= tol * np.maximum(lam, 1.0)
    safe = np.where(coincide, 1.0, diff)
    # cos a - cos b = -2 sin((a+b)/2) sin((a-b)/2)
    divided = -2.0 * np.sin(0.5 * t * total) * np.sin(0.5 * t * diff) / (safe * total)
    mid = 0.5 * total
    limit = -t * np.sin(t * mid) / (2.0 * mid)
    return np.where(coincide, limit, divided)


def duhamel_coefficient(lam_j: float, tau_k: float, t: float, tol: float = COINCIDENCE_TOL) -> float:
    """``(cos tλ_j - cos tτ_k)/(λ_j² - τ_k²)`` with its coincidence limit."""

    if lam_j < 1.0 or tau_k < 1.0:
        raise InvalidInputError(f"frequencies must be at least 1, got {lam_j!r} and {tau_k!r}")
    return float(_coefficients(np.array([float(lam_j)]), np.array([float(tau_k)]), float(t), tol)[0, 0])


@dataclass(frozen=True)
class DuhamelCheck:
    t: float
    residual: float
    scale: float

    @property
    def relative(self) -> float:
        return self.residual / self.scale if self.scale > 0.0 else self.residual

    def to_dict(self) -> Dict[str, Any]:
        return {"t": self.t, "residual": self.residual, "scale": self.scale, "relative": self.relative}


def duhamel_identity_check(pair: OperatorPair, t: float) -> DuhamelCheck:
    """Compare ``cos tP_V - cos tP^0`` with ``E0 (C ∘ B) E_Vᵀ``.

    ``scale`` is ``‖V̄‖_∞ · max|C|``, the natural size of the right-hand side.
    """

    _same_lattice(pair.free, pair.perturbed)
    direct = wave_kernel(pair.perturbed, t) - wave_kernel(pair.free, t)
    coefficients = _coefficients(pair.free.frequencies, pair.perturbed.frequencies, t, COINCIDENCE_TOL)
    expanded = pair.free.eigenvectors @ (coefficients * pair.v_overlap) @ pair.perturbed.eigenvectors.T
    residual = float(np.max(np.abs(direct - expanded)))
    scale = float(np.max(np.abs(pair.potential_diagonal))) * float(np.max(np.abs(coefficients)))
    logger.debug("Duhamel residual at t=%g: %.3e (scale %.3e)", t, residual, scale)
    return DuhamelCheck(t=float(t), residual=residual, scale=scale)


def duhamel_identity_residual(pair: OperatorPair, t: float) -> float:
    """Max absolute entry of the Duhamel residual.

    Raises:
        InvalidPairError: the spectra come from different grids or shifts.
    """

    return duhamel_identity_check(pair, t).residual


# ---------------------------------------------------------------------------
# Trace perturbation sums
# ---------------------------------------------------------------------------


def _divided_differences(
    g: Multiplier,
    lams: np.ndarray,
    taus: np.ndarray,
    g_prime: Optional[Multiplier],
    tol: float,
) -> np.ndarray:
    g_lam = g(lams)[:, None]
    g_tau = g(taus)[None, :]
    diff = lams[:, None] - taus[None, :]
    total = lams[:, None] + taus[None, :]
    coincide = np.abs(diff) <= tol * np.maximum(lams[:, None], 1.0)
    safe = np.where(coincide, 1.0, diff)
    divided = (g_lam - g_tau) / (safe * total)
    if not np.any(coincide):
        return divided
    mid = 0.5 * total[coincide]
    if g_prime is not None:
        slope = g_prime(mid)
    else:
        step = 1e-6 * np.maximum(mid, 1.0)
        slope = (g(mid + step) - g(mid - step)) / (2.0 * step)
    divided[coincide] = slope / (2.0 * mid)
    return divided


def _summand(pair: OperatorPair, g: Multiplier, g_prime: Optional[Multiplier]) -> np.ndarray:
    divided = _divided_differences(
        g, pair.free.frequencies, pair.perturbed.frequencies, g_prime, COINCIDENCE_TOL
    )
    return divided * pair.overlap * pair.v_overlap


@dataclass(frozen=True)
class TraceSum:
    value: float
    direct: float
    residual: float

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "direct": self.direct, "residual": self.residual}


def trace_perturbation_sum(
    pair: OperatorPair, g: Multiplier, g_prime: Optional[Multiplier] = None
) -> TraceSum:
    """``Σ_j Σ_k (g(λ_j) - g(τ_k))/(λ_j² - τ_k²) A[j,k] B[j,k]``.

    The double sum equals ``Tr g(P_V) - Tr g(P^0)``; ``direct`` is that trace
    difference computed from the two spectra. ``g`` must accept arrays;
    ``g_prime`` defaults to a central difference.
    """

    summand = _summand(pair, g, g_prime)
    value = math.fsum(summand.ravel())
    direct = math.fsum(g(pair.perturbed.frequencies)) - math.fsum(g(pair.free.frequencies))
    return TraceSum(value=value, direct=direct, residual=abs(value - direct))


# ---------------------------------------------------------------------------
# Case decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CaseBlock:
    name: str
    index_count: int
    partial_sum: float
    bound_form: str
    bound_value: float

    @property
    def ratio(self) -> float:
        if self.bound_value == 0.0:
            return 0.0 if self.partial_sum == 0.0 else math.inf
        return abs(self.partial_sum) / self.bound_value

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "index_count": self.index_count,
            "partial_sum": self.partial_sum,
            "bound_form": self.bound_form,
            "bound_value": self.bound_value,
            "ratio": self.ratio,
        }


@dataclass(frozen=True)
class CaseFamily:
    multiplier: str
    blocks: Tuple[CaseBlock, ...]
    full_sum: float

    @property
    def reconciliation(self) -> float:
        return abs(math.fsum(block.partial_sum for block in self.blocks) - self.full_sum)

    @property
    def reconciled(self) -> bool:
        return self.reconciliation <= RECONCILE_TOL

    def block(self, name: str) -> CaseBlock:
        for block in self.blocks:
            if block.name == name:
                return block
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "multiplier": self.multiplier,
            "full_sum": self.full_sum,
            "reconciliation": self.reconciliation,
            "reconciled": self.reconciled,
            "cases": [block.to_dict() for block in self.blocks],
        }


@dataclass(frozen=True)
class CaseReport:
    lam: float
    epsilon: float
    short_interval: CaseFamily
    long_interval: CaseFamily

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda": self.lam,
            "epsilon": self.epsilon,
            "short_interval": self.short_interval.to_dict(),
            "long_interval": self.long_interval.to_dict(),
        }


def _bound_values(lam: float, eps: float, n: int) -> Dict[str, float]:
    # C_eps is taken as 1; fit_trace_envelope measures it.
    return {
        "eps*lambda^(n-1)": eps * lam ** (n - 1),
        "C_eps*lambda^(n-3/2)": lam ** (n - 1.5),
        "eps*lambda^(n-1)+C_eps*lambda^(n-3/2)": eps * lam ** (n - 1) + lam ** (n - 1.5),
        "lambda^(n-2)*(log lambda)^(1/2)": lam ** (n - 2) * math.sqrt(math.log(lam)),
        "lambda^(-sigma)": lam ** (-RAPID_DECAY_SIGMA),
    }


def _partition(
    summand: np.ndarray,
    cases: Sequence[Tuple[str, np.ndarray, str]],
    bounds: Dict[str, float],
    multiplier: str,
) -> CaseFamily:
    assigned = np.zeros(summand.shape, dtype=bool)
    blocks: List[CaseBlock] = []
    for name, mask, form in cases:
        # Earlier cases win ties.
        own = mask & ~assigned
        assigned |= own
        blocks.append(
            CaseBlock(
                name=name,
                index_count=int(np.count_nonzero(own)),
                partial_sum=math.fsum(summand[own]),
                bound_form=form,
                bound_value=bounds[form],
            )
        )
    if not np.all(assigned):
        raise AccuracyError("case masks do not cover the index set")
    return CaseFamily(multiplier=multiplier, blocks=tuple(blocks), full_sum=math.fsum(summand.ravel()))


def _short_cases(lams: np.ndarray, taus: np.ndarray, lam: float, eps: float) -> List[Tuple[str, np.ndarray, str]]:
    near_j = (np.abs(lams - lam) <= eps)[:, None]
    near_k = (np.abs(taus - lam) <= eps)[None, :]
    # Dyadic rings (eps, 2^ceil(log2 eps)], ..., (hi/2, hi] tile (eps, hi] with no gap.
    hi = math.ldexp(2.0, math.floor(math.log2(lam)))
    dyadic_j = ((np.abs(lams - lam) > eps) & (np.abs(lams - lam) <= hi))[:, None]
    dyadic_k = ((np.abs(taus - lam) > eps) & (np.abs(taus - lam) <= hi))[None, :]
    high_j = (lams > 2.0 * lam)[:, None]
    high_k = (taus > 2.0 * lam)[None, :]
    everything = np.ones((lams.size, taus.size), dtype=bool)
    return [
        ("case1", near_k & near_j, "eps*lambda^(n-1)"),
        ("case2", near_k & dyadic_j, "C_eps*lambda^(n-3/2)"),
        ("case3", near_j & dyadic_k, "C_eps*lambda^(n-3/2)"),
        ("case4", near_j & high_k, "C_eps*lambda^(n-3/2)"),
        ("case5", near_k & high_j, "C_eps*lambda^(n-3/2)"),
        ("rest", everything, "lambda^(-sigma)"),
    ]


def _long_cases(lams: np.ndarray, taus: np.ndarray, lam: float) -> List[Tuple[str, np.ndarray, str]]:
    low_j = (lams < 0.5 * lam)[:, None]
    low_k = (taus < 0.5 * lam)[None, :]
    med_j = ((lams >= 0.5 * lam) & (lams <= 10.0 * lam))[:, None]
    med_k = ((taus >= 0.5 * lam) & (taus <= 10.0 * lam))[None, :]
    high_j = (lams > 10.0 * lam)[:, None]
    high_k = (taus > 10.0 * lam)[None, :]
    medlow_j = (lams <= 10.0 * lam)[:, None]
    medlow_k = (taus <= 10.0 * lam)[None, :]
    all_j = np.ones((lams.size, 1), dtype=bool)
    return [
        ("Low+Low", low_j & low_k, "lambda^(-sigma)"),
        ("MedLow+Med", medlow_j & med_k, "eps*lambda^(n-1)+C_eps*lambda^(n-3/2)"),
        ("Med+Low", med_j & low_k, "eps*lambda^(n-1)+C_eps*lambda^(n-3/2)"),
        ("All+High", all_j & high_k, "lambda^(n-2)*(log lambda)^(1/2)"),
        ("High+MedLow", high_j & medlow_k, "lambda^(n-2)*(log lambda)^(1/2)"),
    ]


def case_report(pair: OperatorPair, lam: float, eps: float) -> CaseReport:
    """Partial trace sums per short- and long-interval case.

    The short-interval family uses ``g = ~χ_λ`` and the long-interval family
    ``g = ~1_λ``; each family partitions the full index set.

    Raises:
        RangeError: ``λ`` above the counting ceiling of the free spectrum.
    """

    if lam <= 1.0:
        raise InvalidInputError(f"case report needs lambda > 1, got {lam!r}")
    if lam > pair.free.counting_ceiling:
        raise RangeError(f"lambda={lam!r} exceeds the counting ceiling {pair.free.counting_ceiling!r}")
    window_spec = WindowSpec(eps)
    mollifier = MollifierSpec(eps)
    n = pair.grid.domain.dimension
    bounds = _bound_values(lam, eps, n)
    lams = pair.free.frequencies
    taus = pair.perturbed.frequencies

    short_summand = _summand(pair, lambda mu: np.asarray(window(window_spec, lam, mu)), None)
    long_summand = _summand(pair, lambda mu: smoothed_values(mollifier, lam, mu), None)
    report = CaseReport(
        lam=float(lam),
        epsilon=float(eps),
        short_interval=_partition(short_summand, _short_cases(lams, taus, lam, eps), bounds, "window"),
        long_interval=_partition(long_summand, _long_cases(lams, taus, lam), bounds, "mollified_indicator"),
    )
    logger.debug(
        "case report lambda=%g eps=%g: reconciliation %.3e / %.3e",
        lam,
        eps,
        report.short_interval.reconciliation,
        report.long_interval.reconciliation,
    )
    return report


# ---------------------------------------------------------------------------
# Envelope fit
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TraceEnvelope:
    """``|T(λ)| <= a·ελ + b·λ^{1/2}`` fitted over a λ window for one ε."""

    epsilon: float
    lambdas: np.ndarray
    values: np.ndarray
    linear: float
    sqrt: float

    @property
    def c_eps(self) -> Optional[float]:
        return self.sqrt / self.linear if self.linear > 0.0 else None

    def envelope(self) -> np.ndarray:
        return self.linear * self.epsilon * self.lambdas + self.sqrt * np.sqrt(self.lambdas)

    @property
    def holds(self) -> bool:
        return bool(np.all(np.abs(self.values) <= self.envelope() * (1.0 + 1e-12)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "lambdas": self.lambdas,
            "values": self.values,
            "linear": self.linear,
            "sqrt": self.sqrt,
            "c_eps": self.c_eps,
            "holds": self.holds,
        }


@dataclass(frozen=True)
class EnvelopeReport:
    fits: Tuple[TraceEnvelope, ...]

    @property
    def c_eps_monotone(self) -> bool:
        """``C_ε`` should not shrink as ε decreases; other behavior is flagged."""

        ordered = sorted(self.fits, key=lambda fit: -fit.epsilon)
        values = [fit.c_eps for fit in ordered if fit.c_eps is not None]
        return all(later >= earlier for earlier, later in zip(values, values[1:]))

    def to_dict(self) -> Dict[str, Any]:
        return {"fits": [fit.to_dict() for fit in self.fits], "c_eps_monotone": self.c_eps_monotone}


def fit_trace_envelope(
    pair: OperatorPair, lambdas: Sequence[float], epsilons: Sequence[float]
) -> EnvelopeReport:
    """Fit ``C(ελ + C_ε λ^{1/2})`` to ``|trace_perturbation_sum(~χ_λ)|`` per ε.

    Nonnegative least squares gives the shape; the envelope is then scaled up
    until it dominates every sample.
    """

    grid = np.asarray(lambdas, dtype=float)
    if grid.size < 2:
        raise InvalidInputError("envelope fit needs at least two lambda values")
    if grid[-1] > pair.free.counting_ceiling:
        raise RangeError(f"lambda={grid[-1]!r} exceeds the counting ceiling {pair.free.counting_ceiling!r}")
    fits = []
    for eps in epsilons:
        spec = WindowSpec(eps)
        values = np.array(
            [
                trace_perturbation_sum(pair, lambda mu, lam=lam: np.asarray(window(spec, lam, mu))).value
                for lam in grid
            ]
        )
        design = np.column_stack((spec.epsilon * grid, np.sqrt(grid)))
        coefficients, _ = scipy.optimize.nnls(design, np.abs(values))
        fitted = design @ coefficients
        if np.any(fitted <= 0.0):
            # Fall back to the pure square-root shape through the worst point.
            coefficients = np.array([0.0, float(np.max(np.abs(values) / np.sqrt(grid)))])
            fitted = design @ coefficients
        factor = float(np.max(np.abs(values) / fitted)) if np.any(fitted > 0.0) else 0.0
        factor = max(factor, 1.0)
        fits.append(
            TraceEnvelope(
                epsilon=spec.epsilon,
                lambdas=frozen_array(grid),
                values=frozen_array(values),
                linear=float(coefficients[0] * factor),
                sqrt=float(coefficients[1] * factor),
            )
        )
    return EnvelopeReport(fits=tuple(fits))
