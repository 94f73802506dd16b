"""Finite-difference assembly of the free and Schrödinger operators."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import InvalidInputError, InvalidPairError
from .geometry import BoundaryCondition, BoundaryKind, Grid, build_grid, make_domain
from .potentials import DEFAULT_ORDER, PotentialSpec, cell_average
from .types import frozen_array

logger = logging.getLogger(__name__)

CACHE_MAGIC = b"WEYLOP01"
CACHE_HEADER = np.dtype(
    [
        ("n", "<i8"),
        ("h", "<f8"),
        ("bc", "<i8"),
        ("sigma", "<f8"),
        ("shift", "<f8"),
        ("a", "<f8"),
        ("b", "<f8"),
        ("kind", "<i8"),
    ]
)


class OperatorKind(str, Enum):
    FREE = "free"
    SCHRODINGER = "schrodinger"


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    """Dense symmetric matrix of ``-Δ`` or ``-Δ + V`` on the interior lattice.

    Args:
        matrix: ``N x N`` read-only array, ``N`` the grid node count.
        grid: Lattice the operator lives on.
        bc: Boundary condition used for the stencil.
        shift: Constant already added to the diagonal.
        kind: Free or Schrödinger.
        potential: Potential of a Schrödinger operator.
        potential_diagonal: Cell averages of the potential (zeros for free operators).
    """

    matrix: np.ndarray
    grid: Grid
    bc: BoundaryCondition
    shift: float = 0.0
    kind: OperatorKind = OperatorKind.FREE
    potential: Optional[PotentialSpec] = None
    potential_diagonal: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    def describe(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "kind": self.kind.value,
            "bc": self.bc.label(),
            "h": self.grid.h,
            "n": self.size,
            "shift": self.shift,
        }
        if self.potential is not None:
            text_form = _has_text_form(self.potential)
            payload["potential"] = self.potential.to_expression() if text_form else "programmatic"
        return payload


def _has_text_form(spec: PotentialSpec) -> bool:
    try:
        spec.to_expression()
    except InvalidInputError:
        return False
    return True


def _second_difference(count: int, h: float, bc: BoundaryCondition) -> scipy.sparse.csr_matrix:
    """1-D ``-d²/dx²`` on ``count`` interior nodes.

    Dirichlet drops the boundary nodes. Neumann and Robin eliminate the boundary
    value through ``u_bd = u_in / (1 + sigma h)``, which only changes the two
    edge diagonal entries. The elimination is first-order accurate at the
    boundary, against second order for a ghost-point reflection.
    """

    diagonal = np.full(count, 2.0)
    if bc.kind is not BoundaryKind.DIRICHLET:
        edge = 2.0 - 1.0 / (1.0 + bc.sigma * h)
        diagonal[0] = edge
        diagonal[-1] = edge
        if count == 1:
            diagonal[0] = 2.0 - 2.0 / (1.0 + bc.sigma * h)
    off = -np.ones(count - 1)
    stencil = scipy.sparse.diags([off, diagonal, off], [-1, 0, 1], format="csr")
    return stencil / (h * h)


def _freeze(matrix: np.ndarray) -> np.ndarray:
    matrix = np.ascontiguousarray(matrix, dtype=float)
    matrix.setflags(write=False)
    return matrix


def assemble_laplacian(grid: Grid, bc: BoundaryCondition) -> AssembledOperator:
    """5-point ``-Δ`` with the given boundary condition (unshifted)."""

    tx = _second_difference(grid.nx, grid.h, bc)
    ty = _second_difference(grid.ny, grid.h, bc)
    laplacian = scipy.sparse.kron(scipy.sparse.identity(grid.ny), tx) + scipy.sparse.kron(
        ty, scipy.sparse.identity(grid.nx)
    )
    dense = laplacian.toarray()
    # Mirror the upper triangle so symmetry holds bitwise.
    dense = np.triu(dense) + np.triu(dense, 1).T
    logger.debug("assembled %s Laplacian with %d nodes", bc.label(), grid.size)
    return AssembledOperator(
        matrix=_freeze(dense),
        grid=grid,
        bc=bc,
        potential_diagonal=frozen_array(np.zeros(grid.size)),
    )


def assemble_schrodinger(
    grid: Grid, bc: BoundaryCondition, potential: PotentialSpec, order: int = DEFAULT_ORDER
) -> AssembledOperator:
    """``H_V = H^0 + diag(cell averages of V)``."""

    free = assemble_laplacian(grid, bc)
    diagonal = cell_average(potential, grid, order)
    matrix = np.array(free.matrix)
    matrix[np.diag_indices_from(matrix)] += diagonal
    return AssembledOperator(
        matrix=_freeze(matrix),
        grid=grid,
        bc=bc,
        kind=OperatorKind.SCHRODINGER,
        potential=potential,
        potential_diagonal=frozen_array(diagonal),
    )


def smallest_eigenvalue(op: AssembledOperator) -> float:
    values = scipy.linalg.eigh(op.matrix, eigvals_only=True, subset_by_index=[0, 0])
    return float(values[0])


def with_shift(op: AssembledOperator, shift: float) -> AssembledOperator:
    """Add ``shift`` to the diagonal; the recorded shift accumulates."""

    if shift == 0.0:
        return op
    matrix = np.array(op.matrix)
    matrix[np.diag_indices_from(matrix)] += shift
    return replace(op, matrix=_freeze(matrix), shift=op.shift + shift)


def normalize_shift(op: AssembledOperator) -> AssembledOperator:
    """Shift by ``max(0, 1 - mu_min)`` so the spectrum is bounded below by one."""

    mu_min = smallest_eigenvalue(op)
    shift = max(0.0, 1.0 - mu_min)
    logger.debug("smallest eigenvalue %.17g, shift %.17g", mu_min, shift)
    return with_shift(op, shift)


def shift_pair(
    free: AssembledOperator, perturbed: AssembledOperator
) -> Tuple[AssembledOperator, AssembledOperator]:
    """Apply one common shift making both operators bounded below by one.

    The difference ``H_V - H^0`` stays equal to the potential diagonal.
    """

    check_same_lattice(free, perturbed)
    if free.shift != perturbed.shift:
        raise InvalidPairError("operators already carry different shifts")
    shift = max(0.0, 1.0 - smallest_eigenvalue(free), 1.0 - smallest_eigenvalue(perturbed))
    return with_shift(free, shift), with_shift(perturbed, shift)


def check_same_lattice(first: AssembledOperator, second: AssembledOperator) -> None:
    if (
        first.grid.h != second.grid.h
        or first.grid.nx != second.grid.nx
        or first.grid.ny != second.grid.ny
        or first.bc != second.bc
    ):
        raise InvalidPairError("operators were built on different grids or boundary conditions")


def save_operator(op: AssembledOperator, path: Union[str, Path]) -> Path:
    """Write the binary cache: magic, header, row-major matrix, potential diagonal."""

    path = Path(path)
    header = np.zeros(1, dtype=CACHE_HEADER)
    header["n"] = op.size
    header["h"] = op.grid.h
    header["bc"] = op.bc.code
    header["sigma"] = op.bc.sigma
    header["shift"] = op.shift
    header["a"] = op.grid.domain.a
    header["b"] = op.grid.domain.b
    header["kind"] = 0 if op.kind is OperatorKind.FREE else 1
    diagonal = op.potential_diagonal if op.potential_diagonal is not None else np.zeros(op.size)
    with path.open("wb") as handle:
        handle.write(CACHE_MAGIC)
        handle.write(header.tobytes())
        handle.write(np.ascontiguousarray(op.matrix, dtype="<f8").tobytes(order="C"))
        handle.write(np.ascontiguousarray(diagonal, dtype="<f8").tobytes())
    logger.info("wrote operator cache %s", path)
    return path


def load_operator(path: Union[str, Path]) -> AssembledOperator:
    """Read an operator written by :func:`save_operator`.

    The potential expression is not stored; a Schrödinger operator comes back
    with its potential diagonal only.
    """

    raw = Path(path).read_bytes()
    if not raw.startswith(CACHE_MAGIC):
        raise InvalidInputError(f"{path} is not an operator cache file")
    offset = len(CACHE_MAGIC)
    header = np.frombuffer(raw, dtype=CACHE_HEADER, count=1, offset=offset)[0]
    offset += CACHE_HEADER.itemsize
    n = int(header["n"])
    expected = offset + 8 * (n * n + n)
    if len(raw) != expected:
        raise InvalidInputError(f"{path} has {len(raw)} bytes, expected {expected}")
    matrix = np.frombuffer(raw, dtype="<f8", count=n * n, offset=offset).reshape(n, n)
    diagonal = np.frombuffer(raw, dtype="<f8", count=n, offset=offset + 8 * n * n)
    domain = make_domain("rectangle", a=float(header["a"]), b=float(header["b"]))
    grid = build_grid(domain, float(header["h"]))
    if grid.size != n:
        raise InvalidInputError(f"{path} header disagrees with its grid ({grid.size} != {n})")
    return AssembledOperator(
        matrix=_freeze(matrix.astype(float)),
        grid=grid,
        bc=BoundaryCondition.from_code(int(header["bc"]), float(header["sigma"])),
        shift=float(header["shift"]),
        kind=OperatorKind.FREE if int(header["kind"]) == 0 else OperatorKind.SCHRODINGER,
        potential_diagonal=frozen_array(diagonal),
    )
