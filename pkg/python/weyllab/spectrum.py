"""Eigendecomposition, exact oracle spectra, counting and spectral functions."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.special

from .errors import (
    AccuracyError,
    CapacityError,
    InvalidInputError,
    RangeError,
    SolverError,
    UnsupportedDomainError,
)
from .geometry import BoundaryCondition, BoundaryKind, Grid
from .operators import AssembledOperator
from .report import write_csv
from .types import _require_positive, frozen_array

logger = logging.getLogger(__name__)

DEFAULT_MAX_SIZE = 6400
MULTIPLICITY_RTOL = 1e-9
BESSEL_SCAN_STEP = 0.25
BESSEL_XTOL = 1e-13


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Frequencies and weighted-orthonormal eigenfunctions of one operator.

    ``eigenvectors[:, k]`` is the k-th eigenfunction sampled at the grid nodes,
    normalized so that ``weight * sum(e_k**2) == 1``.
    """

    frequencies: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    weight: float
    shift: float = 0.0
    source: Dict[str, Any] = field(default_factory=dict)
    grid: Optional[Grid] = None

    @property
    def size(self) -> int:
        return int(self.frequencies.shape[0])

    @property
    def node_count(self) -> int:
        return int(self.eigenvectors.shape[0])

    @property
    def counting_ceiling(self) -> float:
        if self.grid is None:
            return math.inf
        return self.grid.counting_ceiling

    @classmethod
    def from_modes(
        cls,
        eigenvalues: Sequence[float],
        eigenvectors: np.ndarray,
        weight: float,
        shift: float = 0.0,
        source: Optional[Dict[str, Any]] = None,
        grid: Optional[Grid] = None,
    ) -> "SpectralData":
        """Build spectral data from eigenvalues and weighted-orthonormal columns."""

        values = np.asarray(eigenvalues, dtype=float)
        vectors = np.asarray(eigenvectors, dtype=float)
        if vectors.ndim != 2 or vectors.shape[1] != values.shape[0]:
            raise InvalidInputError("eigenvectors must have one column per eigenvalue")
        if np.any(np.diff(values) < 0.0):
            raise InvalidInputError("eigenvalues must be ascending")
        return cls(
            frequencies=frozen_array(np.sqrt(np.clip(values, 0.0, None))),
            eigenvalues=frozen_array(values),
            eigenvectors=frozen_array(vectors),
            weight=_require_positive(weight, "SpectralData 'weight'"),
            shift=shift,
            source=dict(source or {}),
            grid=grid,
        )

    def gram_error(self) -> float:
        """Largest entry of ``weight * EᵀE - I``."""

        gram = self.weight * (self.eigenvectors.T @ self.eigenvectors)
        return float(np.max(np.abs(gram - np.eye(self.size))))

    def rayleigh_residuals(self, op: AssembledOperator) -> np.ndarray:
        """``‖H e_k − μ_k e_k‖ / max(μ_k, 1)`` in the weighted norm, per mode."""

        residual = op.matrix @ self.eigenvectors - self.eigenvectors * self.eigenvalues
        norms = np.sqrt(self.weight * np.sum(residual * residual, axis=0))
        return norms / np.maximum(np.abs(self.eigenvalues), 1.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "size": self.size,
            "weight": self.weight,
            "shift": self.shift,
            "source": dict(self.source),
            "frequencies": self.frequencies,
        }


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0.0] = 1.0
    return vectors * signs


def eigendecompose(op: AssembledOperator, max_size: int = DEFAULT_MAX_SIZE) -> SpectralData:
    """All eigenpairs of a dense symmetric operator.

    Eigenvector signs are fixed so the largest-magnitude entry of every column
    is positive, which makes the output reproducible for identical input.

    Raises:
        CapacityError: the operator exceeds ``max_size``.
        SolverError: the matrix has non-finite entries or the symmetric
            eigensolver did not converge.
    """

    if op.size > max_size:
        raise CapacityError(f"operator of size {op.size} exceeds the dense limit {max_size}")
    bad = np.flatnonzero(~np.isfinite(op.matrix).all(axis=1))
    if bad.size:
        raise SolverError(f"operator has non-finite entries in {bad.size} rows, first at node {int(bad[0])}")
    try:
        eigenvalues, vectors = scipy.linalg.eigh(op.matrix)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"eigensolver failed: {exc}") from exc
    vectors = _fix_signs(vectors) / op.grid.h
    logger.debug(
        "eigendecomposed %d x %d operator; lowest eigenvalue %.17g",
        op.size,
        op.size,
        eigenvalues[0],
    )
    return SpectralData.from_modes(
        eigenvalues,
        vectors,
        weight=op.grid.quadrature_weight,
        shift=op.shift,
        source=op.describe(),
        grid=op.grid,
    )


# ---------------------------------------------------------------------------
# Exact oracles
# ---------------------------------------------------------------------------


class Provenance(str, Enum):
    RECTANGLE_LATTICE = "rectangle_lattice"
    DISK_BESSEL = "disk_bessel"


@dataclass(frozen=True, eq=False)
class ExactSpectrum:
    """Closed-form spectrum, complete below ``cutoff``, listed with multiplicity."""

    frequencies: np.ndarray
    provenance: Provenance
    parameters: Dict[str, Any]
    cutoff: float

    def __len__(self) -> int:
        return int(self.frequencies.shape[0])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "provenance": self.provenance.value,
            "parameters": dict(self.parameters),
            "cutoff": self.cutoff,
            "count": len(self),
        }


def _closed_form_bc(bc: BoundaryCondition, where: str) -> None:
    if bc.kind is BoundaryKind.ROBIN:
        raise UnsupportedDomainError(f"{where}: no closed form for Robin conditions")


def exact_rectangle_spectrum(
    a: float, b: float, bc: BoundaryCondition, cutoff: float
) -> ExactSpectrum:
    """Frequencies ``π sqrt(m²/a² + k²/b²) <= cutoff``.

    Dirichlet uses ``m, k >= 1`` and Neumann ``m, k >= 0``.
    """

    a = _require_positive(a, "rectangle 'a'")
    b = _require_positive(b, "rectangle 'b'")
    cutoff = _require_positive(cutoff, "spectrum cutoff")
    _closed_form_bc(bc, "exact_rectangle_spectrum")
    first = 1 if bc.kind is BoundaryKind.DIRICHLET else 0
    bound = (cutoff / math.pi) ** 2
    m = np.arange(first, int(math.floor(cutoff * a / math.pi)) + 1, dtype=float)
    k = np.arange(first, int(math.floor(cutoff * b / math.pi)) + 1, dtype=float)
    mm, kk = np.meshgrid(m, k, indexing="ij")
    squared = (mm / a) ** 2 + (kk / b) ** 2
    inside = squared[squared <= bound]
    frequencies = np.sort(math.pi * np.sqrt(inside))
    return ExactSpectrum(
        frequencies=frozen_array(frequencies),
        provenance=Provenance.RECTANGLE_LATTICE,
        parameters={"a": a, "b": b, "bc": bc.label()},
        cutoff=cutoff,
    )


def _bessel_zeros(order: int, limit: float, derivative: bool) -> List[float]:
    """Positive zeros of ``J_order`` (or its derivative) up to ``limit``."""

    def function(x: float) -> float:
        if derivative:
            return float(scipy.special.jvp(order, x))
        return float(scipy.special.jv(order, x))

    start = max(float(order), 1e-6)
    grid = np.arange(start, limit + 2 * BESSEL_SCAN_STEP, BESSEL_SCAN_STEP)
    values = scipy.special.jvp(order, grid) if derivative else scipy.special.jv(order, grid)
    zeros: List[float] = []
    for left, right, f_left, f_right in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if f_left == 0.0:
            root = float(left)
        elif f_left * f_right < 0.0:
            root = scipy.optimize.brentq(function, left, right, xtol=BESSEL_XTOL)
        else:
            continue
        if root <= limit:
            zeros.append(root)
    return zeros


def exact_disk_spectrum(radius: float, bc: BoundaryCondition, cutoff: float) -> ExactSpectrum:
    """Disk frequencies ``j_{ν,k}/R`` (Dirichlet) or ``j'_{ν,k}/R`` (Neumann).

    Each order ``ν >= 1`` carries multiplicity two. Completeness is checked with
    the interlacing ``j_{ν,k} < j_{ν+1,k} < j_{ν,k+1}``.
    """

    radius = _require_positive(radius, "disk radius")
    cutoff = _require_positive(cutoff, "spectrum cutoff")
    _closed_form_bc(bc, "exact_disk_spectrum")
    derivative = bc.kind is BoundaryKind.NEUMANN
    limit = cutoff * radius
    frequencies: List[float] = [0.0] if derivative else []
    previous: Optional[List[float]] = None
    order = 0
    while order <= limit:
        zeros = _bessel_zeros(order, limit, derivative)
        if order == 0 and derivative:
            zeros = [z for z in zeros if z > 1e-6]
        if not derivative and previous is not None:
            for index, root in enumerate(zeros):
                upper = previous[index + 1] if index + 1 < len(previous) else math.inf
                if index >= len(previous) or not previous[index] < root < upper:
                    raise AccuracyError(f"Bessel zeros of order {order} fail interlacing")
        if not zeros and order > 0:
            break
        multiplicity = 1 if order == 0 else 2
        for root in zeros:
            frequencies.extend([root] * multiplicity)
        previous = zeros
        order += 1
    values = np.sort(np.asarray(frequencies)) / radius
    logger.debug("disk spectrum below %s: %d frequencies up to order %d", cutoff, values.size, order)
    return ExactSpectrum(
        frequencies=frozen_array(values),
        provenance=Provenance.DISK_BESSEL,
        parameters={"radius": radius, "bc": bc.label()},
        cutoff=cutoff,
    )


# ---------------------------------------------------------------------------
# Counting and spectral functions
# ---------------------------------------------------------------------------


def counting_function(frequencies: Sequence[float], lam: Union[float, np.ndarray]) -> Union[int, np.ndarray]:
    """``#{k : τ_k <= λ}`` by binary search; vectorized over ``lam``."""

    counts = np.searchsorted(np.asarray(frequencies, dtype=float), lam, side="right")
    if np.ndim(lam) == 0:
        return int(counts)
    return counts


def check_counting_range(data: SpectralData, lambdas: Union[float, np.ndarray]) -> None:
    """Refuse frequencies beyond the trusted range of a discrete spectrum."""

    top = float(np.max(lambdas))
    if top > data.counting_ceiling * (1.0 + 1e-12):
        raise RangeError(
            f"lambda={top!r} exceeds the counting ceiling {data.counting_ceiling!r} of the grid"
        )


def spectral_function(data: SpectralData, node: int, lam: float) -> float:
    """``Σ_{τ_k <= λ} |e_k(x)|²`` at a grid node."""

    if not 0 <= node < data.node_count:
        raise InvalidInputError(f"node {node} outside 0..{data.node_count - 1}")
    count = counting_function(data.frequencies, lam)
    row = data.eigenvectors[node, :count]
    return float(np.dot(row, row))


@dataclass(frozen=True)
class EigenfunctionBoundSweep:
    lambdas: np.ndarray
    sup_values: np.ndarray
    ratios: np.ndarray
    argmax_nodes: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambdas": self.lambdas,
            "sup_values": self.sup_values,
            "ratios": self.ratios,
            "max_ratio": self.max_ratio,
        }


def eigenfunction_bound_sweep(
    data: SpectralData, lambdas: Sequence[float], exponent: Optional[float] = None
) -> EigenfunctionBoundSweep:
    """``sup_x Σ_{τ_k<=λ} |e_k(x)|² / λ**n`` across ``lambdas``."""

    grid_values = np.asarray(lambdas, dtype=float)
    if grid_values.size == 0 or np.any(np.diff(grid_values) < 0.0):
        raise InvalidInputError("lambda grid must be nonempty and ascending")
    check_counting_range(data, grid_values)
    power = exponent if exponent is not None else float(data.grid.domain.dimension if data.grid else 2)
    running = np.zeros(data.node_count)
    done = 0
    sups, nodes = [], []
    for count in counting_function(data.frequencies, grid_values):
        if count > done:
            block = data.eigenvectors[:, done:count]
            running += np.sum(block * block, axis=1)
            done = int(count)
        index = int(np.argmax(running))
        sups.append(running[index])
        nodes.append(index)
    sup_values = np.asarray(sups)
    return EigenfunctionBoundSweep(
        lambdas=frozen_array(grid_values),
        sup_values=frozen_array(sup_values),
        ratios=frozen_array(sup_values / grid_values**power),
        argmax_nodes=frozen_array(nodes, dtype=int),
    )


def multiplicity_flags(frequencies: Sequence[float], rtol: float = MULTIPLICITY_RTOL) -> np.ndarray:
    """1 for every frequency that coincides with a neighbour, else 0."""

    values = np.asarray(frequencies, dtype=float)
    flags = np.zeros(values.size, dtype=int)
    if values.size > 1:
        close = np.isclose(values[1:], values[:-1], rtol=rtol, atol=rtol)
        flags[1:] |= close
        flags[:-1] |= close
    return flags


def export_spectrum_csv(frequencies: Sequence[float], path: Union[str, Path]) -> Path:
    """Write ``index,frequency,multiplicity_flag`` rows."""

    values = np.asarray(frequencies, dtype=float)
    flags = multiplicity_flags(values)
    rows = [(index, float(value), int(flag)) for index, (value, flag) in enumerate(zip(values, flags))]
    return write_csv(path, ("index", "frequency", "multiplicity_flag"), rows)


FrequencySource = Union[SpectralData, ExactSpectrum, Sequence[float], np.ndarray]


def frequency_view(source: FrequencySource) -> Tuple[np.ndarray, float]:
    """Sorted frequencies of ``source`` with the largest λ they are trusted at.

    Discrete spectra are trusted up to the grid's counting ceiling and exact
    oracles up to their cutoff; bare lists are unrestricted.
    """

    if isinstance(source, SpectralData):
        return source.frequencies, source.counting_ceiling
    if isinstance(source, ExactSpectrum):
        return source.frequencies, source.cutoff
    values = np.asarray(source, dtype=float)
    if values.ndim != 1:
        raise InvalidInputError("frequency list must be one-dimensional")
    if np.any(np.diff(values) < 0.0):
        raise InvalidInputError("frequency list must be sorted")
    return values, math.inf
