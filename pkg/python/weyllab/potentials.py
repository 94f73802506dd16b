"""Kato-class potentials, singular quadrature, and the bounded/L1-small split."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    AccuracyError,
    InvalidInputError,
    SingularPointError,
    SplitFailureError,
    UnsupportedDomainError,
)
from .geometry import DomainSpec, Grid, Shape
from .types import _require_float, _require_positive, format_float

logger = logging.getLogger(__name__)

ArrayFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]
Bounds = Tuple[float, float, float, float]

DEFAULT_ORDER = 16
# Radial panels [r/2, r] reach down to R * 2**-(RADIAL_BITS / (2 - alpha)).
RADIAL_BITS = 50
MAX_NEAR_SPLITS = 8
REFINEMENT_TOL = 1e-2
# Innermost polar radius, in units of the spacing of doubles at the center.
RADIAL_FLOOR_ULPS = 2.0 ** 12
MAX_TRUNCATION_EXPONENT = 64
# Cells whose node lies within this many spacings of a center use singular quadrature.
NEAR_CELL_SPACINGS = 2.5


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``[-1, 1]`` (read-only, cached)."""

    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroTerm:
    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.zeros(np.broadcast(x, y).shape)

    def to_expression(self) -> str:
        return "zero()"

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "zero"}


@dataclass(frozen=True)
class ConstantTerm:
    value: float

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.full(np.broadcast(x, y).shape, self.value)

    def to_expression(self) -> str:
        return f"constant({self.value!r})"

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "constant", "value": self.value}


@dataclass(frozen=True)
class BoundedTerm:
    """Bounded term given by a vectorized callable with a declared sup-norm bound."""

    function: ArrayFunction = field(compare=False)
    sup: float
    name: str = "bounded"

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        values = np.asarray(self.function(x, y), dtype=float)
        return np.broadcast_to(values, np.broadcast(x, y).shape)

    def to_expression(self) -> str:
        raise InvalidInputError(f"bounded term {self.name!r} has no text form")

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "bounded", "name": self.name, "sup": self.sup}


@dataclass(frozen=True)
class InversePowerTerm:
    """``strength * |x - x0|**-alpha`` with ``0 < alpha < 2``."""

    x0: float
    y0: float
    alpha: float
    strength: float = 1.0

    @property
    def center(self) -> Tuple[float, float]:
        return (self.x0, self.y0)

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        r = np.hypot(np.asarray(x, dtype=float) - self.x0, np.asarray(y, dtype=float) - self.y0)
        with np.errstate(divide="ignore"):
            return self.strength * r ** (-self.alpha)

    def to_expression(self) -> str:
        return (
            f"inverse_power(x0={self.x0!r}, y0={self.y0!r}, "
            f"alpha={self.alpha!r}, strength={self.strength!r})"
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": "inverse_power",
            "x0": self.x0,
            "y0": self.y0,
            "alpha": self.alpha,
            "strength": self.strength,
        }


PotentialTerm = Union[ZeroTerm, ConstantTerm, BoundedTerm, InversePowerTerm]


def zero() -> ZeroTerm:
    return ZeroTerm()


def constant(value: float) -> ConstantTerm:
    return ConstantTerm(_require_float(value, "constant 'value'"))


def bounded(function: ArrayFunction, sup: float, name: str = "bounded") -> BoundedTerm:
    if not callable(function):
        raise InvalidInputError("bounded term needs a callable")
    sup = _require_float(sup, "bounded 'sup'")
    if sup < 0.0:
        raise InvalidInputError(f"bounded 'sup' must be >= 0, got {sup!r}")
    return BoundedTerm(function=function, sup=sup, name=name)


def inverse_power(x0: float, y0: float, alpha: float, strength: float = 1.0) -> InversePowerTerm:
    """Singular term; ``alpha`` must lie in ``(0, 2)`` for Kato admissibility in the plane."""

    alpha = _require_float(alpha, "inverse_power 'alpha'")
    if not 0.0 < alpha < 2.0:
        raise InvalidInputError(f"inverse_power 'alpha' must lie in (0, 2), got {alpha!r}")
    return InversePowerTerm(
        x0=_require_float(x0, "inverse_power 'x0'"),
        y0=_require_float(y0, "inverse_power 'y0'"),
        alpha=alpha,
        strength=_require_float(strength, "inverse_power 'strength'"),
    )


def term_from_dict(data: Mapping[str, Any]) -> PotentialTerm:
    kind = data.get("type")
    if kind == "zero":
        return zero()
    if kind == "constant":
        return constant(data["value"])
    if kind == "inverse_power":
        return inverse_power(data["x0"], data["y0"], data["alpha"], data.get("strength", 1.0))
    if kind == "bounded":
        raise InvalidInputError("bounded terms cannot be rebuilt from serialized data")
    raise InvalidInputError(f"Unknown potential term type: {kind!r}")


@dataclass(frozen=True)
class Singularity:
    x: float
    y: float
    alpha: float


@dataclass(frozen=True)
class PotentialSpec:
    """Finite sum of potential terms."""

    terms: Tuple[PotentialTerm, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def is_zero(self) -> bool:
        return all(
            isinstance(term, ZeroTerm)
            or (isinstance(term, ConstantTerm) and term.value == 0.0)
            or (isinstance(term, BoundedTerm) and term.sup == 0.0)
            or (isinstance(term, InversePowerTerm) and term.strength == 0.0)
            for term in self.terms
        )

    @property
    def bounded_sup(self) -> float:
        """Sup-norm bound of the bounded (non-singular) terms."""

        total = 0.0
        for term in self.terms:
            if isinstance(term, ConstantTerm):
                total += abs(term.value)
            elif isinstance(term, BoundedTerm):
                total += term.sup
        return total

    def singularities(self) -> List[Singularity]:
        """Singular centers, merged when two terms share one (largest exponent kept)."""

        merged: Dict[Tuple[float, float], float] = {}
        for term in self.terms:
            if isinstance(term, InversePowerTerm) and term.strength != 0.0:
                merged[term.center] = max(merged.get(term.center, 0.0), term.alpha)
        return [Singularity(x, y, alpha) for (x, y), alpha in sorted(merged.items())]

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        total = np.zeros(np.broadcast(x, y).shape)
        for term in self.terms:
            total = total + term.evaluate(x, y)
        return total

    def to_expression(self) -> str:
        if not self.terms:
            return "zero()"
        return " + ".join(term.to_expression() for term in self.terms)

    def to_dict(self) -> Dict[str, Any]:
        return {"terms": [term.to_dict() for term in self.terms]}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PotentialSpec":
        terms = data.get("terms")
        if not isinstance(terms, list):
            raise InvalidInputError("PotentialSpec 'terms' must be a list")
        return cls(tuple(term_from_dict(item) for item in terms))


def evaluate_potential(spec: PotentialSpec, x: Sequence[float]) -> float:
    """Value of ``V`` at a single point away from the singular centers."""

    px = _require_float(x[0], "x[0]")
    py = _require_float(x[1], "x[1]")
    for singular in spec.singularities():
        if px == singular.x and py == singular.y:
            raise SingularPointError(f"potential is singular at ({px!r}, {py!r})")
    return float(spec.evaluate(np.array(px), np.array(py)))


def kato_kernel(r: float | np.ndarray, n: int) -> float | np.ndarray:
    """``W_n(r)``: ``r**(2 - n)`` for ``n >= 3`` and ``log(2 + 1/r)`` for ``n = 2``."""

    if n < 2:
        raise InvalidInputError(f"kato_kernel needs n >= 2, got {n}")
    values = np.asarray(r, dtype=float)
    if np.any(values <= 0.0):
        raise InvalidInputError("kato_kernel needs r > 0")
    result = np.log(2.0 + 1.0 / values) if n == 2 else values ** (2 - n)
    if np.ndim(r) == 0:
        return float(result)
    return result


# ---------------------------------------------------------------------------
# Singular quadrature
# ---------------------------------------------------------------------------


def _radial_panels(alpha: float, extra_depth: int) -> int:
    return int(math.ceil(RADIAL_BITS / (2.0 - alpha))) + max(extra_depth, 0)


def _radial_rule(order: int, panels: int) -> Tuple[np.ndarray, np.ndarray]:
    """Relative radii and weights of geometric panels ``[2**-(k+1), 2**-k]``."""

    t, w = gauss_legendre(order)
    scales = 2.0 ** -np.arange(panels, dtype=float)
    radii = scales[:, None] * ((3.0 + t) / 4.0)[None, :]
    weights = scales[:, None] * (w / 4.0)[None, :]
    return radii.ravel(), weights.ravel()


def _tensor_rule(func: ArrayFunction, bounds: Bounds, order: int) -> float:
    x0, x1, y0, y1 = bounds
    t, w = gauss_legendre(order)
    xs = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * t
    ys = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * t
    grid_x, grid_y = np.meshgrid(xs, ys, indexing="xy")
    values = func(grid_x, grid_y)
    return float(0.25 * (x1 - x0) * (y1 - y0) * (w @ values @ w))


def _radial_floor(center: Tuple[float, float]) -> float:
    return RADIAL_FLOOR_ULPS * float(np.spacing(max(abs(center[0]), abs(center[1]), 1.0)))


def _polar_corner_rule(
    func: ArrayFunction,
    bounds: Bounds,
    corner: Tuple[float, float],
    center: Tuple[float, float],
    alpha: float,
    order: int,
    extra_depth: int,
) -> float:
    """Integrate over a rectangle whose only singular point sits at ``corner``.

    The fan is centered on ``center``, the exact singular point, which may differ
    from the rounded ``corner`` of the piece by a few ulps. Radial panels stop at
    a floor where offsets from ``center`` are still resolved in floating point;
    the disk inside the floor is closed with the ``r**-alpha`` tail of the
    innermost samples.
    """

    x0, x1, y0, y1 = bounds
    cx, cy = center
    sx = 1.0 if corner[0] == x0 else -1.0
    sy = 1.0 if corner[1] == y0 else -1.0
    width = x1 - cx if sx > 0 else cx - x0
    height = y1 - cy if sy > 0 else cy - y0
    panels = _radial_panels(alpha, extra_depth)
    reach = max(min(width, height) / _radial_floor(center), 2.0)
    panels = max(min(panels, int(math.floor(math.log2(reach)))), 1)
    innermost = 2.0 ** -panels
    split = math.atan2(height, width)
    t, w = gauss_legendre(order)
    radii, radial_weights = _radial_rule(order, panels)
    total = 0.0
    for lo, hi, side in ((0.0, split, "width"), (split, 0.5 * math.pi, "height")):
        theta = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t
        theta_weights = 0.5 * (hi - lo) * w
        if side == "width":
            ray = width / np.cos(theta)
        else:
            ray = height / np.sin(theta)
        r = ray[:, None] * radii[None, :]
        px = cx + sx * r * np.cos(theta)[:, None]
        py = cy + sy * r * np.sin(theta)[:, None]
        values = func(px, py) * r
        inner = values @ radial_weights
        total += float(np.dot(theta_weights, inner * ray))
        r_in = ray * innermost
        edge = func(cx + sx * r_in * np.cos(theta), cy + sy * r_in * np.sin(theta))
        total += float(np.dot(theta_weights, edge * r_in * r_in)) / (2.0 - alpha)
    return total


def _distance_to_box(x: float, y: float, bounds: Bounds) -> float:
    x0, x1, y0, y1 = bounds
    dx = max(x0 - x, 0.0, x - x1)
    dy = max(y0 - y, 0.0, y - y1)
    return math.hypot(dx, dy)


def _integrate_piece(
    func: ArrayFunction,
    bounds: Bounds,
    singularities: Sequence[Singularity],
    order: int,
    extra_depth: int,
    depth: int,
) -> float:
    x0, x1, y0, y1 = bounds
    scale = max(x1 - x0, y1 - y0)
    corner_hits: Dict[Tuple[float, float], Singularity] = {}
    near = False
    for singular in singularities:
        hit = None
        for corner in ((x0, y0), (x1, y0), (x0, y1), (x1, y1)):
            if math.hypot(singular.x - corner[0], singular.y - corner[1]) <= 1e-13 * scale:
                hit = corner
                break
        if hit is not None:
            previous = corner_hits.get(hit)
            if previous is None or singular.alpha > previous.alpha:
                corner_hits[hit] = singular
        elif _distance_to_box(singular.x, singular.y, bounds) < scale:
            near = True

    if len(corner_hits) >= 2 or (not corner_hits and near and depth < MAX_NEAR_SPLITS):
        xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        pieces = [
            _integrate_piece(func, sub, singularities, order, extra_depth, depth + 1)
            for sub in ((x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1))
        ]
        return math.fsum(pieces)
    if corner_hits:
        (corner, singular), = corner_hits.items()
        return _polar_corner_rule(
            func, bounds, corner, (singular.x, singular.y), singular.alpha, order, extra_depth
        )
    return _tensor_rule(func, bounds, order)


def integrate_rectangle(
    func: ArrayFunction,
    bounds: Bounds,
    singularities: Sequence[Singularity] = (),
    order: int = DEFAULT_ORDER,
    extra_depth: int = 0,
) -> float:
    """Integrate ``func`` over an axis-aligned rectangle with point singularities.

    The rectangle is cut along the coordinate lines through every singular center
    it contains, so centers only ever sit at corners of the pieces. Pieces with a
    singular corner use a polar fan with geometric radial panels; pieces near a
    center are bisected; the rest use tensor Gauss-Legendre.

    Args:
        func: Vectorized integrand ``f(x, y)``.
        bounds: ``(x0, x1, y0, y1)``.
        singularities: Points where ``func`` may blow up integrably.
        order: Gauss-Legendre order per panel.
        extra_depth: Additional radial panels toward each singular corner.

    Returns:
        The integral.
    """

    x0, x1, y0, y1 = bounds
    # Centers within rounding of an edge snap to it instead of cutting a sliver.
    gap = 1e-13 * max(x1 - x0, y1 - y0)
    xs = sorted(
        {x0, x1}
        | {s.x for s in singularities if x0 + gap < s.x < x1 - gap and y0 - gap <= s.y <= y1 + gap}
    )
    ys = sorted(
        {y0, y1}
        | {s.y for s in singularities if y0 + gap < s.y < y1 - gap and x0 - gap <= s.x <= x1 + gap}
    )
    pieces = [
        _integrate_piece(func, (xa, xb, ya, yb), singularities, order, extra_depth, 0)
        for xa, xb in zip(xs, xs[1:])
        for ya, yb in zip(ys, ys[1:])
    ]
    return math.fsum(pieces)


def checked_integral(
    func: ArrayFunction,
    bounds: Bounds,
    singularities: Sequence[Singularity] = (),
    order: int = DEFAULT_ORDER,
    extra_depth: int = 0,
    what: str = "integral",
) -> float:
    """Integrate at ``order`` and ``2 * order``; raise when they differ by more than 1%."""

    coarse = integrate_rectangle(func, bounds, singularities, order, extra_depth)
    fine = integrate_rectangle(func, bounds, singularities, 2 * order, extra_depth)
    if not (math.isfinite(coarse) and math.isfinite(fine)):
        raise AccuracyError(f"{what} is not finite: {coarse!r} vs {fine!r}")
    if abs(fine - coarse) > REFINEMENT_TOL * max(abs(fine), 1e-300):
        raise AccuracyError(f"{what} did not converge: {coarse!r} vs {fine!r}")
    logger.debug("%s converged: %s (order %d)", what, format_float(fine), 2 * order)
    return fine


def _rectangle_bounds(domain: DomainSpec) -> Bounds:
    if domain.shape is not Shape.RECTANGLE:
        raise UnsupportedDomainError(f"quadrature needs a rectangle, got {domain.describe()}")
    return (0.0, domain.a, 0.0, domain.b)


def l1_norm(spec: PotentialSpec, domain: DomainSpec, order: int = DEFAULT_ORDER) -> float:
    """``∫_M |V|`` with singular quadrature around every center."""

    bounds = _rectangle_bounds(domain)
    if spec.is_zero:
        return 0.0

    def integrand(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.abs(spec.evaluate(x, y))

    return checked_integral(integrand, bounds, spec.singularities(), order, what="L1 norm")


# ---------------------------------------------------------------------------
# Cell averages
# ---------------------------------------------------------------------------


def _far_cell_averages(term: PotentialTerm, nodes: np.ndarray, h: float, order: int) -> np.ndarray:
    t, w = gauss_legendre(order)
    offsets = 0.5 * h * t
    xs = nodes[:, 0][:, None, None] + offsets[None, None, :]
    ys = nodes[:, 1][:, None, None] + offsets[None, :, None]
    values = term.evaluate(xs, ys)
    weights = 0.25 * np.outer(w, w)
    return np.einsum("kij,ij->k", values, weights)


def cell_average(spec: PotentialSpec, grid: Grid, order: int = DEFAULT_ORDER) -> np.ndarray:
    """Average of ``V`` over the ``h x h`` cell around every grid node.

    Constant terms contribute their value exactly. Cells close to a singular
    center are integrated with the polar corner rule and checked against a
    doubled order.
    """

    h = grid.h
    nodes = grid.nodes
    averages = np.zeros(grid.size)
    for term in spec.terms:
        if isinstance(term, ZeroTerm):
            continue
        if isinstance(term, ConstantTerm):
            averages = averages + term.value
            continue
        if isinstance(term, BoundedTerm):
            averages = averages + _far_cell_averages(term, nodes, h, order)
            continue
        if term.strength == 0.0:
            continue
        distances = np.hypot(nodes[:, 0] - term.x0, nodes[:, 1] - term.y0)
        near = distances < NEAR_CELL_SPACINGS * h
        term_values = np.zeros(grid.size)
        if np.any(~near):
            term_values[~near] = _far_cell_averages(term, nodes[~near], h, order)
        singular = [Singularity(term.x0, term.y0, term.alpha)]
        for index in np.flatnonzero(near):
            x, y = nodes[index]
            bounds = (x - 0.5 * h, x + 0.5 * h, y - 0.5 * h, y + 0.5 * h)
            integral = checked_integral(
                term.evaluate, bounds, singular, order, what=f"cell average at node {index}"
            )
            term_values[index] = integral / (h * h)
        logger.debug(
            "cell averages for %s: %d singular cells", term.to_expression(), int(near.sum())
        )
        averages = averages + term_values
    return averages


# ---------------------------------------------------------------------------
# Kato norm
# ---------------------------------------------------------------------------


def _ray_lengths(theta: np.ndarray, point: Tuple[float, float], bounds: Bounds) -> np.ndarray:
    x0, x1, y0, y1 = bounds
    px, py = point
    dx, dy = np.cos(theta), np.sin(theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = np.where(dx > 0, (x1 - px) / dx, np.where(dx < 0, (x0 - px) / dx, np.inf))
        ty = np.where(dy > 0, (y1 - py) / dy, np.where(dy < 0, (y0 - py) / dy, np.inf))
    return np.maximum(np.minimum(tx, ty), 0.0)


def _angular_breaks(point: Tuple[float, float], bounds: Bounds, delta: float) -> np.ndarray:
    x0, x1, y0, y1 = bounds
    px, py = point
    breaks = [0.0, 2.0 * math.pi]
    for cx, cy in ((x0, y0), (x1, y0), (x0, y1), (x1, y1)):
        if (cx, cy) != (px, py):
            breaks.append(math.atan2(cy - py, cx - px))
    for normal, gap in ((0.0, x1 - px), (math.pi, px - x0), (0.5 * math.pi, y1 - py), (-0.5 * math.pi, py - y0)):
        if 0.0 < gap < delta:
            opening = math.acos(gap / delta)
            breaks.extend([normal - opening, normal + opening])
    wrapped = sorted({round(angle % (2.0 * math.pi), 15) for angle in breaks} | {2.0 * math.pi})
    return np.array(wrapped)


def _kato_disk_integral(
    spec: PotentialSpec,
    point: Tuple[float, float],
    alpha: float,
    bounds: Bounds,
    delta: float,
    n: int,
    order: int,
) -> float:
    t, w = gauss_legendre(order)
    breaks = _angular_breaks(point, bounds, delta)
    reach = max(delta / _radial_floor(point), 2.0)
    panels = max(min(_radial_panels(alpha, 0), int(math.floor(math.log2(reach)))), 1)
    radii, radial_weights = _radial_rule(order, panels)
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi - lo <= 1e-15:
            continue
        theta = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t
        theta_weights = 0.5 * (hi - lo) * w
        ray = np.minimum(delta, _ray_lengths(theta, point, bounds))
        r = ray[:, None] * radii[None, :]
        px = point[0] + r * np.cos(theta)[:, None]
        py = point[1] + r * np.sin(theta)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            kernel = np.log(2.0 + 1.0 / r) if n == 2 else r ** (2 - n)
            values = np.where(r > 0.0, np.abs(spec.evaluate(px, py)) * kernel * r, 0.0)
        total += float(np.dot(theta_weights, (values @ radial_weights) * ray))
    return total


def kato_candidates(
    spec: PotentialSpec, domain: DomainSpec, delta: float, per_side: int = 8
) -> List[Tuple[Tuple[float, float], float]]:
    """Candidate points for the Kato supremum with their local singular exponent.

    Every singular center inside the domain is a candidate; lattice points
    ``(i a / per_side, j b / per_side)`` are added when they lie farther than
    ``delta`` from every center.
    """

    bounds = _rectangle_bounds(domain)
    centers = [s for s in spec.singularities() if domain.contains((s.x, s.y))]
    candidates: List[Tuple[Tuple[float, float], float]] = [((s.x, s.y), s.alpha) for s in centers]
    for j in range(1, per_side):
        for i in range(1, per_side):
            point = (bounds[1] * i / per_side, bounds[3] * j / per_side)
            if all(math.hypot(point[0] - s.x, point[1] - s.y) > delta for s in spec.singularities()):
                candidates.append((point, 0.0))
    return candidates


def kato_norm(
    spec: PotentialSpec,
    domain: DomainSpec,
    delta: float,
    order: int = DEFAULT_ORDER,
    per_side: int = 8,
) -> float:
    """Estimate ``sup_x ∫_{d(x,y)<delta} |V(y)| W_n(d(x,y)) dy`` over candidate points.

    Args:
        spec: Potential.
        domain: Rectangle carrying the potential.
        delta: Radius of the local balls.
        order: Gauss-Legendre order of the polar rule (checked against ``2 * order``).
        per_side: Lattice resolution of the candidate points.

    Returns:
        The largest local weighted mass found.
    """

    delta = _require_positive(delta, "kato_norm 'delta'")
    bounds = _rectangle_bounds(domain)
    if spec.is_zero:
        return 0.0
    best = 0.0
    best_point: Optional[Tuple[float, float]] = None
    for point, alpha in kato_candidates(spec, domain, delta, per_side):
        coarse = _kato_disk_integral(spec, point, alpha, bounds, delta, domain.dimension, order)
        fine = _kato_disk_integral(spec, point, alpha, bounds, delta, domain.dimension, 2 * order)
        if not (math.isfinite(coarse) and math.isfinite(fine)):
            raise AccuracyError(f"Kato integral at {point} is not finite: {coarse!r} vs {fine!r}")
        if abs(fine - coarse) > REFINEMENT_TOL * max(abs(fine), 1e-300):
            raise AccuracyError(f"Kato integral at {point} did not converge: {coarse!r} vs {fine!r}")
        if fine > best:
            best, best_point = fine, point
    logger.debug("kato_norm(delta=%s) = %s at %s", format_float(delta), format_float(best), best_point)
    return best


# ---------------------------------------------------------------------------
# Truncation split
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitPotential:
    """``V = V0 + V1`` with ``V0 = clip(V, -K, K)`` and ``∫|V1| < epsilon**2``."""

    spec: PotentialSpec
    level: float
    epsilon: float
    l1_norm_v1: float
    levels_tried: int

    def v0(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.clip(self.spec.evaluate(x, y), -self.level, self.level)

    def v1(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        values = self.spec.evaluate(x, y)
        return values - np.clip(values, -self.level, self.level)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "potential": self.spec.to_dict(),
            "K": self.level,
            "epsilon": self.epsilon,
            "l1_norm_v1": self.l1_norm_v1,
            "levels_tried": self.levels_tried,
        }


def _excess_mass(spec: PotentialSpec, bounds: Bounds, level: float, order: int, extra_depth: int) -> float:
    def integrand(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.maximum(np.abs(spec.evaluate(x, y)) - level, 0.0)

    return integrate_rectangle(integrand, bounds, spec.singularities(), order, extra_depth)


def split_potential(
    spec: PotentialSpec, domain: DomainSpec, epsilon: float, order: int = DEFAULT_ORDER
) -> SplitPotential:
    """Split ``V`` by truncation at the smallest admissible power of two.

    The search starts at the smallest power of two that bounds the non-singular
    terms, so ``V0 = V`` whenever ``V`` is already bounded.
    """

    epsilon = _require_positive(epsilon, "split 'epsilon'")
    if epsilon > 1.0:
        raise InvalidInputError(f"split 'epsilon' must lie in (0, 1], got {epsilon!r}")
    bounds = _rectangle_bounds(domain)
    target = epsilon * epsilon
    start = 0 if spec.bounded_sup <= 1.0 else int(math.ceil(math.log2(spec.bounded_sup)))
    for tried, exponent in enumerate(range(start, MAX_TRUNCATION_EXPONENT + 1), start=1):
        level = 2.0**exponent
        # Keep the radial panels well below the truncation radius.
        extra_depth = exponent + 20
        mass = _excess_mass(spec, bounds, level, order, extra_depth)
        if mass < target:
            refined = _excess_mass(spec, bounds, level, 2 * order, extra_depth)
            if abs(refined - mass) > REFINEMENT_TOL * max(abs(refined), target * 1e-6):
                raise AccuracyError(
                    f"excess mass at K={level!r} did not converge: {mass!r} vs {refined!r}"
                )
            if refined >= target:
                continue
            logger.debug(
                "split at K=2**%d: ∫|V1| = %s < %s", exponent, format_float(refined), format_float(target)
            )
            return SplitPotential(
                spec=spec, level=level, epsilon=epsilon, l1_norm_v1=refined, levels_tried=tried
            )
    raise SplitFailureError(
        f"no truncation level up to 2**{MAX_TRUNCATION_EXPONENT} gives ∫|V1| < {target!r}"
    )
