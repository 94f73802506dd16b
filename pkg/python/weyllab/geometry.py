"""Planar domains, boundary conditions and the uniform interior lattice."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Mapping, Sequence, Tuple

import numpy as np

from .errors import InvalidInputError, UnsupportedDomainError
from .types import _require_float, _require_int, _require_positive

Point = Tuple[float, float]

# Relative tolerance for "h divides the side length".
COMMENSURABILITY_TOL = 1e-9


class Shape(str, Enum):
    RECTANGLE = "rectangle"
    DISK = "disk"


class BoundaryKind(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    ROBIN = "robin"


_BC_CODES = {BoundaryKind.DIRICHLET: 0, BoundaryKind.NEUMANN: 1, BoundaryKind.ROBIN: 2}


@dataclass(frozen=True)
class DomainSpec:
    """Planar domain with boundary.

    Args:
        shape: Rectangle ``[0, a] x [0, b]`` or disk of radius ``radius``.
        a: Rectangle width.
        b: Rectangle height.
        radius: Disk radius.
        dimension: Dimension used by the generic Weyl formulas.
    """

    shape: Shape
    a: float = 0.0
    b: float = 0.0
    radius: float = 0.0
    dimension: int = 2

    @property
    def area(self) -> float:
        if self.shape is Shape.RECTANGLE:
            return self.a * self.b
        return math.pi * self.radius**2

    @property
    def perimeter(self) -> float:
        if self.shape is Shape.RECTANGLE:
            return 2.0 * (self.a + self.b)
        return 2.0 * math.pi * self.radius

    def contains(self, point: Point) -> bool:
        x, y = point
        if self.shape is Shape.RECTANGLE:
            return 0.0 <= x <= self.a and 0.0 <= y <= self.b
        return math.hypot(x, y) <= self.radius

    def describe(self) -> str:
        if self.shape is Shape.RECTANGLE:
            return f"rectangle({self.a!r}, {self.b!r})"
        return f"disk({self.radius!r})"

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "shape": self.shape.value,
            "dimension": self.dimension,
            "area": self.area,
            "perimeter": self.perimeter,
        }
        if self.shape is Shape.RECTANGLE:
            payload.update({"a": self.a, "b": self.b})
        else:
            payload["radius"] = self.radius
        return payload

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DomainSpec":
        shape = str(data.get("shape", ""))
        if shape == Shape.RECTANGLE.value:
            return make_domain(shape, a=data["a"], b=data["b"])
        if shape == Shape.DISK.value:
            return make_domain(shape, radius=data["radius"])
        raise InvalidInputError(f"Unknown domain shape: {shape!r}")


def make_domain(shape: str | Shape, dimension: int = 2, **params: Any) -> DomainSpec:
    """Build a validated domain; area and perimeter follow from the shape."""

    try:
        kind = Shape(shape)
    except ValueError as exc:
        raise InvalidInputError(f"Unknown domain shape: {shape!r}") from exc
    dimension = _require_int(dimension, "DomainSpec 'dimension'")
    if dimension < 2:
        raise InvalidInputError(f"dimension must be >= 2, got {dimension}")
    if kind is Shape.RECTANGLE:
        return DomainSpec(
            shape=kind,
            a=_require_positive(params.get("a"), "Rectangle 'a'"),
            b=_require_positive(params.get("b"), "Rectangle 'b'"),
            dimension=dimension,
        )
    return DomainSpec(
        shape=kind,
        radius=_require_positive(params.get("radius"), "Disk 'radius'"),
        dimension=dimension,
    )


@dataclass(frozen=True)
class BoundaryCondition:
    """Dirichlet, Neumann, or Robin ``d_nu u + sigma u = 0`` with ``sigma >= 0``."""

    kind: BoundaryKind
    sigma: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma < 0.0:
            raise InvalidInputError(f"Robin sigma must be >= 0, got {self.sigma!r}")
        if self.kind is not BoundaryKind.ROBIN and self.sigma != 0.0:
            raise InvalidInputError(f"sigma is only meaningful for Robin, got {self.kind.value}")

    @property
    def code(self) -> int:
        """Stable integer used by the binary operator cache."""

        return _BC_CODES[self.kind]

    def label(self) -> str:
        if self.kind is BoundaryKind.ROBIN:
            return f"robin:{self.sigma!r}"
        return self.kind.value

    @classmethod
    def parse(cls, text: str) -> "BoundaryCondition":
        """Parse ``dirichlet``, ``neumann`` or ``robin:SIGMA``."""

        raw = text.strip().lower()
        if raw.startswith("robin"):
            _, _, sigma_text = raw.partition(":")
            try:
                sigma = float(sigma_text) if sigma_text else 0.0
            except ValueError as exc:
                raise InvalidInputError(f"Invalid Robin sigma in {text!r}") from exc
            return cls(BoundaryKind.ROBIN, sigma)
        try:
            return cls(BoundaryKind(raw))
        except ValueError as exc:
            raise InvalidInputError(f"Unknown boundary condition: {text!r}") from exc

    @classmethod
    def from_code(cls, code: int, sigma: float = 0.0) -> "BoundaryCondition":
        for kind, value in _BC_CODES.items():
            if value == code:
                return cls(kind, sigma if kind is BoundaryKind.ROBIN else 0.0)
        raise InvalidInputError(f"Unknown boundary-condition code: {code}")


DIRICHLET = BoundaryCondition(BoundaryKind.DIRICHLET)
NEUMANN = BoundaryCondition(BoundaryKind.NEUMANN)


@dataclass(frozen=True)
class Grid:
    """Uniform interior lattice ``(i h, j h)``, ``1 <= i <= nx``, ``1 <= j <= ny``.

    Nodes are ordered with ``x`` varying fastest: index ``(j - 1) * nx + (i - 1)``.
    """

    domain: DomainSpec
    h: float
    nx: int
    ny: int
    nodes: np.ndarray = field(repr=False, compare=False)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def quadrature_weight(self) -> float:
        return self.h * self.h

    @property
    def spectral_ceiling(self) -> float:
        """Largest 5-point-stencil frequency, ``2 sqrt(2) / h``."""

        return 2.0 * math.sqrt(2.0) / self.h

    @property
    def counting_ceiling(self) -> float:
        """Largest frequency at which counting claims are trusted."""

        return self.spectral_ceiling / 4.0

    def node_index(self, i: int, j: int) -> int:
        if not (1 <= i <= self.nx and 1 <= j <= self.ny):
            raise InvalidInputError(f"node ({i}, {j}) outside 1..{self.nx} x 1..{self.ny}")
        return (j - 1) * self.nx + (i - 1)

    def nearest_node(self, point: Point) -> int:
        i = min(max(int(round(point[0] / self.h)), 1), self.nx)
        j = min(max(int(round(point[1] / self.h)), 1), self.ny)
        return self.node_index(i, j)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "domain": self.domain.to_dict(),
            "h": self.h,
            "nx": self.nx,
            "ny": self.ny,
            "spectral_ceiling": self.spectral_ceiling,
        }


def build_grid(domain: DomainSpec, h: float) -> Grid:
    """Lay the interior lattice of spacing ``h`` on a rectangle."""

    if domain.shape is not Shape.RECTANGLE:
        raise UnsupportedDomainError(
            f"grids are only built on rectangles, got {domain.describe()}"
        )
    h = _require_positive(h, "Grid 'h'")
    counts = []
    for side, name in ((domain.a, "a"), (domain.b, "b")):
        steps = side / h
        rounded = round(steps)
        if rounded < 2 or abs(steps - rounded) > COMMENSURABILITY_TOL * max(steps, 1.0):
            raise InvalidInputError(f"h={h!r} does not divide side {name}={side!r}")
        counts.append(int(rounded) - 1)
    nx, ny = counts
    xs = h * np.arange(1, nx + 1, dtype=float)
    ys = h * np.arange(1, ny + 1, dtype=float)
    xx, yy = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])
    nodes.setflags(write=False)
    return Grid(domain=domain, h=h, nx=nx, ny=ny, nodes=nodes)


def grid_for_points(domain: DomainSpec, points_per_side: int) -> Grid:
    """Grid with ``points_per_side`` interior nodes along the first side."""

    points_per_side = _require_int(points_per_side, "points_per_side")
    return build_grid(domain, domain.a / (points_per_side + 1))


def distance(x: Sequence[float], y: Sequence[float]) -> float:
    """Euclidean distance, which realizes the geodesic distance on flat domains."""

    return math.hypot(_require_float(x[0], "x[0]") - _require_float(y[0], "y[0]"),
                      _require_float(x[1], "x[1]") - _require_float(y[1], "y[1]"))


def pairwise_distances(nodes: np.ndarray, first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Distances between node pairs given by index arrays."""

    delta = nodes[first] - nodes[second]
    return np.hypot(delta[:, 0], delta[:, 1])
