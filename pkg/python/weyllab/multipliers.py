"""Mollified spectral indicator, window bump and the dyadic decomposition.

The mollified indicator is

    ~1_λ(τ) = (1/π) ∫ ρ(εt) sin(λt)/t cos(τt) dt,

computed two ways: by Gauss-Legendre quadrature of the oscillatory integral,
and as the convolution of the indicator of ``[-λ, λ]`` with the kernel
``K_ε(s) = (1/2π) ∫ ρ(εt) e^{-ist} dt``. The convolution reduces to the odd
primitive ``Φ(y) = (1/π) ∫_0^1 ρ(u) sin(yu)/u du`` of the rescaled kernel,
so ``~1_λ(τ) = Φ((τ+λ)/ε) - Φ((τ-λ)/ε)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.special

from .errors import AccuracyError, FitFailureError, InvalidInputError, RangeError
from .potentials import gauss_legendre
from .report import Curve, emit_svg, write_csv
from .types import _require_int, _require_positive, frozen_array

logger = logging.getLogger(__name__)

ROUTE_TOL = 1e-6
PANEL_ORDER = 16
# Beyond this |y| the primitive equals ±1/2 to far below double precision.
PHI_SATURATION = 2500.0
PHI_CHUNK = 256
DERIVATIVE_STEP = 0.1
COINCIDENCE_TOL = 1e-8
PARTITION_TOL = 1e-12
WINDOW_CUTOFF = 800.0
FINE_HALF_WIDTH = 40.0
DECAY_ORDERS = (2, 4)

ArrayFunction = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# Fixed bumps
# ---------------------------------------------------------------------------


def _flat_exp(u: np.ndarray) -> np.ndarray:
    """``exp(-1/u)`` for ``u > 0`` and 0 elsewhere."""

    positive = u > 0.0
    safe = np.where(positive, u, 1.0)
    return np.where(positive, np.exp(-1.0 / safe), 0.0)


def smooth_step(u: Union[float, np.ndarray]) -> np.ndarray:
    """C-infinity step: 0 for ``u <= 0``, 1 for ``u >= 1``."""

    u = np.asarray(u, dtype=float)
    rising = _flat_exp(u)
    falling = _flat_exp(1.0 - u)
    return rising / (rising + falling)


def rho(t: Union[float, np.ndarray]) -> np.ndarray:
    """Even cutoff: 1 on ``|t| <= 1/2``, 0 on ``|t| >= 1``."""

    a = np.abs(np.asarray(t, dtype=float))
    return np.where(a <= 0.5, 1.0, 1.0 - smooth_step(2.0 * (a - 0.5)))


def chi(s: Union[float, np.ndarray]) -> np.ndarray:
    """``exp(1 - 1/(1 - s²))`` on ``|s| < 1``, zero outside; peak 1 at 0."""

    square = np.square(np.asarray(s, dtype=float))
    inside = square < 1.0
    safe = np.where(inside, 1.0 - square, 1.0)
    return np.where(inside, np.exp(1.0 - 1.0 / safe), 0.0)


def psi(s: Union[float, np.ndarray]) -> np.ndarray:
    """1 for ``s <= 1``, 0 for ``s >= 2``; the primitive of the dyadic bump."""

    s = np.asarray(s, dtype=float)
    return np.where(s <= 1.0, 1.0, 1.0 - smooth_step(s - 1.0))


def beta(s: Union[float, np.ndarray]) -> np.ndarray:
    """``ψ(s) - ψ(2s)``, supported in ``(1/2, 2)``; dyadic sums telescope."""

    s = np.asarray(s, dtype=float)
    return psi(s) - psi(2.0 * s)


def _panel_rule(lo: float, hi: float, panels: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = gauss_legendre(order)
    edges = np.linspace(lo, hi, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    points = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    scaled = (half[:, None] * weights[None, :]).ravel()
    return points, scaled


# ---------------------------------------------------------------------------
# Mollified indicator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MollifierSpec:
    """Scale ``ε`` of the mollifier and the quadrature resolution.

    The t-integral runs over ``|t| <= 1/ε`` (the support of ``ρ(εt)``) on
    panels no wider than ``π/(λ+τ+1)``, each with ``order`` Gauss-Legendre nodes.
    """

    epsilon: float
    order: int = PANEL_ORDER

    def __post_init__(self) -> None:
        eps = _require_positive(self.epsilon, "MollifierSpec 'epsilon'")
        if eps > 1.0:
            raise InvalidInputError(f"MollifierSpec 'epsilon' must lie in (0, 1], got {eps!r}")
        if _require_int(self.order, "MollifierSpec 'order'") < 2:
            raise InvalidInputError("MollifierSpec 'order' must be at least 2")
        object.__setattr__(self, "epsilon", eps)

    @property
    def cutoff(self) -> float:
        return 1.0 / self.epsilon

    def to_dict(self) -> Dict[str, Any]:
        return {"epsilon": self.epsilon, "order": self.order, "cutoff": self.cutoff}


def _primitive(y: np.ndarray, order: int) -> np.ndarray:
    """``Φ(y) = (1/π)[Si(y/2) + ∫_{1/2}^1 ρ(u) sin(yu)/u du]``, vectorized."""

    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.empty_like(y)
    saturated = np.abs(y) >= PHI_SATURATION
    out[saturated] = 0.5 * np.sign(y[saturated])
    live = np.flatnonzero(~saturated)
    for start in range(0, live.size, PHI_CHUNK):
        index = live[start : start + PHI_CHUNK]
        ys = y[index]
        panels = max(1, math.ceil(0.5 * (float(np.max(np.abs(ys))) + 1.0) / math.pi))
        u, w = _panel_rule(0.5, 1.0, panels, order)
        tail = np.sin(np.outer(ys, u)) @ (rho(u) * w / u)
        si, _ = scipy.special.sici(0.5 * ys)
        out[index] = (si + tail) / math.pi
    return out


def indicator(lam: float, taus: Union[float, np.ndarray]) -> np.ndarray:
    """Sharp indicator of ``[-λ, λ]``."""

    return (np.abs(np.asarray(taus, dtype=float)) <= lam).astype(float)


def smoothed_values(spec: MollifierSpec, lam: float, taus: Union[float, np.ndarray]) -> np.ndarray:
    """Convolution route for ``~1_λ`` on an array of τ (no cross-check)."""

    taus = np.asarray(taus, dtype=float)
    flat = taus.ravel()
    eps = spec.epsilon
    values = _primitive((flat + lam) / eps, spec.order) - _primitive((flat - lam) / eps, spec.order)
    return values.reshape(taus.shape)


def indicator_by_quadrature(spec: MollifierSpec, lam: float, tau: float) -> float:
    """Oscillatory-integral route: ``(2/π) ∫_0^{1/ε} ρ(εt) sin(λt) cos(τt)/t dt``."""

    top = spec.cutoff
    panels = max(1, math.ceil(top * (lam + tau + 1.0) / math.pi))
    t, w = _panel_rule(0.0, top, panels, spec.order)
    integrand = rho(spec.epsilon * t) * np.sin(lam * t) * np.cos(tau * t) / t
    return float(2.0 / math.pi * np.dot(w, integrand))


def indicator_by_convolution(spec: MollifierSpec, lam: float, tau: float) -> float:
    return float(smoothed_values(spec, lam, np.array([tau]))[0])


def _check_indicator_args(lam: float, tau: float) -> Tuple[float, float]:
    lam = _require_positive(lam, "lambda")
    if lam < 1.0:
        raise InvalidInputError(f"lambda must be at least 1, got {lam!r}")
    tau = float(tau)
    if not math.isfinite(tau) or tau < 0.0:
        raise InvalidInputError(f"tau must be finite and nonnegative, got {tau!r}")
    return lam, tau


def smoothed_indicator(spec: MollifierSpec, lam: float, tau: float) -> float:
    """``~1_λ(τ)`` with both routes evaluated and compared.

    Raises:
        AccuracyError: the two routes differ by more than ``ROUTE_TOL``.
    """

    lam, tau = _check_indicator_args(lam, tau)
    oscillatory = indicator_by_quadrature(spec, lam, tau)
    convolved = indicator_by_convolution(spec, lam, tau)
    if abs(oscillatory - convolved) > ROUTE_TOL:
        raise AccuracyError(
            f"mollified indicator routes disagree at lambda={lam!r}, tau={tau!r}: "
            f"{oscillatory!r} vs {convolved!r}"
        )
    return convolved


def route_agreement(
    triples: Sequence[Tuple[float, float, float]], order: int = PANEL_ORDER
) -> float:
    """Largest route difference over ``(λ, ε, τ)`` triples."""

    worst = 0.0
    for lam, eps, tau in triples:
        spec = MollifierSpec(eps, order)
        lam, tau = _check_indicator_args(lam, tau)
        gap = abs(indicator_by_quadrature(spec, lam, tau) - indicator_by_convolution(spec, lam, tau))
        worst = max(worst, gap)
    logger.debug("route agreement over %d triples: %.3e", len(triples), worst)
    return worst


def _central_difference(func: ArrayFunction, taus: np.ndarray, step: float, derivative: int) -> np.ndarray:
    if derivative == 0:
        return func(taus)
    if derivative == 1:
        return (func(taus + step) - func(taus - step)) / (2.0 * step)
    return (func(taus + step) - 2.0 * func(taus) + func(taus - step)) / (step * step)


def smoothed_derivative(
    spec: MollifierSpec, lam: float, taus: Union[float, np.ndarray], derivative: int = 1
) -> np.ndarray:
    """``∂_τ^j ~1_λ`` by central differences at step ``ε/10``."""

    taus = np.asarray(taus, dtype=float)
    return _central_difference(
        lambda points: smoothed_values(spec, lam, points),
        taus,
        DERIVATIVE_STEP * spec.epsilon,
        derivative,
    )


@dataclass(frozen=True)
class DecayFit:
    constant: float
    order: int
    derivative: int
    worst_tau: float
    samples: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "constant": self.constant,
            "order": self.order,
            "derivative": self.derivative,
            "worst_tau": self.worst_tau,
            "samples": self.samples,
        }


def decay_grid(lam: float, eps: float, samples: int = 200) -> np.ndarray:
    """τ values on both sides of λ, geometrically spaced in ``|λ - τ|``.

    The offsets run from ``ε/100`` to ``max(λ/2, 20ε)``; negative τ are dropped.
    """

    reach = max(0.5 * lam, 20.0 * eps)
    offsets = np.concatenate(([0.0], np.geomspace(eps / 100.0, reach, samples)))
    taus = np.unique(np.concatenate((lam - offsets, lam + offsets)))
    return taus[taus >= 0.0]


def check_indicator_decay(
    spec: MollifierSpec,
    lam: float,
    order: int,
    taus: Sequence[float],
    derivative: int = 0,
    smoothed: Optional[ArrayFunction] = None,
) -> DecayFit:
    """Smallest ``C`` with ``dev(τ) <= C (1 + |λ-τ|/ε)^{-N}`` on the grid.

    ``dev`` is ``|1_λ - ~1_λ|`` for ``derivative == 0`` and
    ``ε^j |∂_τ^j ~1_λ|`` otherwise. ``smoothed`` replaces ``~1_λ``.

    Raises:
        FitFailureError: the certified constant is not finite.
    """

    if order not in DECAY_ORDERS:
        raise InvalidInputError(f"decay order must be one of {DECAY_ORDERS}, got {order!r}")
    if derivative not in (0, 1, 2):
        raise InvalidInputError(f"derivative must be 0, 1 or 2, got {derivative!r}")
    grid = np.asarray(taus, dtype=float)
    if grid.size == 0 or np.any(grid < 0.0):
        raise InvalidInputError("tau grid must be nonempty and nonnegative")
    eps = spec.epsilon
    func = smoothed if smoothed is not None else (lambda points: smoothed_values(spec, lam, points))
    if derivative == 0:
        deviation = np.abs(indicator(lam, grid) - func(grid))
    else:
        deviation = eps**derivative * np.abs(
            _central_difference(func, grid, DERIVATIVE_STEP * eps, derivative)
        )
    scaled = deviation * (1.0 + np.abs(lam - grid) / eps) ** order
    if not np.all(np.isfinite(scaled)):
        raise FitFailureError(f"decay constant is not finite at lambda={lam!r}")
    worst = int(np.argmax(scaled))
    fit = DecayFit(
        constant=float(scaled[worst]),
        order=order,
        derivative=derivative,
        worst_tau=float(grid[worst]),
        samples=int(grid.size),
    )
    logger.debug("decay constant C_%d (j=%d) = %.6g at tau=%.6g", order, derivative, fit.constant, fit.worst_tau)
    return fit


def decay_shell_ratio(spec: MollifierSpec, lam: float, k: float, samples: int = 400) -> float:
    """Envelope ratio ``max_{[k,2k]ε} |1-~1| / max_{[2k,4k]ε} |1-~1|``.

    Both sides of λ are sampled; the deviation oscillates, so shell maxima
    stand in for its envelope.
    """

    eps = spec.epsilon

    def shell_max(lo: float, hi: float) -> float:
        offsets = np.linspace(lo * eps, hi * eps, samples)
        taus = np.concatenate((lam - offsets, lam + offsets))
        taus = taus[taus >= 0.0]
        return float(np.max(np.abs(indicator(lam, taus) - smoothed_values(spec, lam, taus))))

    inner = shell_max(k, 2.0 * k)
    outer = shell_max(2.0 * k, 4.0 * k)
    return math.inf if outer == 0.0 else inner / outer


def mollification_trace_error(frequencies: Sequence[float], spec: MollifierSpec, lam: float) -> float:
    """``Tr(~1_λ(P) - 1_λ(P)) = Σ_k (~1_λ(τ_k) - 1_λ(τ_k))``."""

    taus = np.asarray(frequencies, dtype=float)
    if taus.size == 0:
        return 0.0
    return math.fsum(smoothed_values(spec, lam, taus) - indicator(lam, taus))


@dataclass(frozen=True, eq=False)
class IndicatorProfile:
    lam: float
    epsilon: float
    taus: np.ndarray
    smoothed: np.ndarray
    exact: np.ndarray

    def rows(self) -> List[Tuple[float, float, float, float]]:
        return [
            (float(t), float(s), float(e), float(s - e))
            for t, s, e in zip(self.taus, self.smoothed, self.exact)
        ]

    def write_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(path, ("tau", "smoothed", "indicator", "difference"), self.rows())

    def write_svg(self, path: Union[str, Path]) -> Path:
        curves = [
            Curve.of("mollified", self.taus, self.smoothed),
            Curve.of("indicator", self.taus, self.exact),
        ]
        title = f"mollified indicator, λ={self.lam:g}, ε={self.epsilon:g}"
        return emit_svg(path, curves, title=title, xlabel="τ", ylabel="value")


def indicator_profile(spec: MollifierSpec, lam: float, taus: Sequence[float]) -> IndicatorProfile:
    grid = np.asarray(taus, dtype=float)
    if grid.size == 0:
        raise InvalidInputError("indicator profile needs at least one tau")
    return IndicatorProfile(
        lam=float(lam),
        epsilon=spec.epsilon,
        taus=frozen_array(grid),
        smoothed=frozen_array(smoothed_values(spec, lam, grid)),
        exact=frozen_array(indicator(lam, grid)),
    )


# ---------------------------------------------------------------------------
# Window
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WindowSpec:
    epsilon: float

    def __post_init__(self) -> None:
        eps = _require_positive(self.epsilon, "WindowSpec 'epsilon'")
        if eps > 1.0:
            raise InvalidInputError(f"WindowSpec 'epsilon' must lie in (0, 1], got {eps!r}")
        object.__setattr__(self, "epsilon", eps)


def window(spec: WindowSpec, lam: float, tau: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """``~χ_λ(τ) = χ((λ - τ)/ε)``."""

    values = chi((lam - np.asarray(tau, dtype=float)) / spec.epsilon)
    if values.ndim == 0:
        return float(values)
    return values


@dataclass(frozen=True)
class WindowFourierCheck:
    direct: float
    transform: float
    error: float

    def to_dict(self) -> Dict[str, Any]:
        return {"direct": self.direct, "transform": self.transform, "error": self.error}


def window_fourier_check(
    spec: WindowSpec, lam: float, tau: float, cutoff: float = WINDOW_CUTOFF, order: int = PANEL_ORDER
) -> WindowFourierCheck:
    """Compare ``~χ_λ(τ)`` with its cosine-transform representation.

    ``(1/π) ∫ ε χ̂(εt) e^{itλ} cos(tτ) dt`` truncated to ``|εt| <= cutoff``
    equals ``J((λ-τ)/ε) + J((λ+τ)/ε)`` where ``J`` is χ convolved with the
    Dirichlet kernel ``sin(cutoff·x)/(πx)``.
    """

    panels = math.ceil(2.0 * (cutoff + 1.0) / math.pi)
    s, w = _panel_rule(-1.0, 1.0, panels, order)
    weighted = chi(s) * w

    def dirichlet(a: float) -> float:
        kernel = cutoff / math.pi * np.sinc(cutoff * (s - a) / math.pi)
        return float(np.dot(weighted, kernel))

    eps = spec.epsilon
    transform = dirichlet((lam - tau) / eps) + dirichlet((lam + tau) / eps)
    direct = float(window(spec, lam, tau))
    return WindowFourierCheck(direct=direct, transform=transform, error=abs(transform - direct))


# ---------------------------------------------------------------------------
# Dyadic decomposition
# ---------------------------------------------------------------------------


def _floor_log2(value: float) -> int:
    # value = m * 2**exponent with m in [0.5, 1).
    _, exponent = math.frexp(value)
    return exponent - 1


@dataclass(frozen=True)
class DyadicDecomposition:
    """Dyadic bumps ``β(2^{-ℓ}s)`` attached to a mollifier scale ``ε``.

    ``ℓ0`` is the largest integer with ``2^{ℓ0} <= ε``; every scale at or below
    it is lumped into ``β0(s) = ψ(2^{-ℓ0}|s|)``.
    """

    mollifier: MollifierSpec

    @property
    def epsilon(self) -> float:
        return self.mollifier.epsilon

    @property
    def ell0(self) -> int:
        return _floor_log2(self.epsilon)

    def beta0(self, s: Union[float, np.ndarray]) -> np.ndarray:
        return psi(np.ldexp(np.abs(np.asarray(s, dtype=float)), -self.ell0))

    @staticmethod
    def beta_tilde(s: Union[float, np.ndarray]) -> np.ndarray:
        """``β(|s|)/s``, zero off the support."""

        s = np.asarray(s, dtype=float)
        bump = beta(np.abs(s))
        return np.where(bump != 0.0, bump / np.where(s == 0.0, 1.0, s), 0.0)

    @staticmethod
    def band(lam: float, ell: int, nu: int, sign: int) -> Tuple[float, float]:
        """``I^-_{ℓ,ν} = (λ-(ν+1)2^ℓ, λ-ν2^ℓ]`` or ``I^+_{ℓ,ν} = (λ+ν2^ℓ, λ+(ν+1)2^ℓ]``."""

        if nu < 0:
            raise InvalidInputError(f"band index nu must be nonnegative, got {nu!r}")
        width = math.ldexp(1.0, ell)
        if sign < 0:
            return lam - (nu + 1) * width, lam - nu * width
        return lam + nu * width, lam + (nu + 1) * width

    def left_endpoint(self, lam: float, ell: int, nu: int, sign: int) -> float:
        return self.band(lam, ell, nu, sign)[0]


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    levels: np.ndarray
    values: np.ndarray
    total: float
    low: float
    high: float
    covered: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "levels": self.levels,
            "values": self.values,
            "total": self.total,
            "low": self.low,
            "high": self.high,
            "covered": self.covered,
        }


def dyadic_partition(decomp: DyadicDecomposition, s: float, L: int) -> DyadicPartition:
    """Band values ``β(2^{-ℓ}s)`` for ``|ℓ| <= L``.

    ``low`` is ``β0(s)`` and ``high`` the sum over ``ℓ0 < ℓ <= L``; ``covered``
    says the partial sum reached 1.
    """

    s = _require_positive(s, "s")
    L = _require_int(L, "L")
    levels = np.arange(-L, L + 1)
    values = beta(np.ldexp(s, -levels))
    total = math.fsum(values)
    above = levels > decomp.ell0
    return DyadicPartition(
        levels=frozen_array(levels, dtype=int),
        values=frozen_array(values),
        total=total,
        low=float(decomp.beta0(s)),
        high=math.fsum(values[above]),
        covered=abs(total - 1.0) <= PARTITION_TOL,
    )


# ---------------------------------------------------------------------------
# Littlewood-Paley symbols
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymbolValues:
    m0: float
    m: float
    r: float
    sign: int

    def to_dict(self) -> Dict[str, Any]:
        return {"m0": self.m0, "m": self.m, "R": self.r, "sign": self.sign}


def _check_regime(lam: float, lam_j: float, tau: float) -> None:
    if not 0.5 * lam <= tau <= 10.0 * lam:
        raise RangeError(f"tau={tau!r} outside [lambda/2, 10 lambda] for lambda={lam!r}")
    if not 0.0 <= lam_j <= 10.0 * lam:
        raise RangeError(f"lambda_j={lam_j!r} outside [0, 10 lambda] for lambda={lam!r}")


def _r_symbol(lam_j: np.ndarray, tau: np.ndarray, ell: int) -> np.ndarray:
    scale = math.ldexp(1.0, -ell)
    return scale * DyadicDecomposition.beta_tilde(scale * (lam_j - tau)) / (lam_j + tau)


def _m0_symbol(
    decomp: DyadicDecomposition,
    lam: float,
    lam_j: np.ndarray,
    tau: np.ndarray,
    smoothed_j: np.ndarray,
) -> np.ndarray:
    spec = decomp.mollifier
    diff = lam_j - tau
    smoothed_tau = smoothed_values(spec, lam, tau)
    coincide = np.abs(diff) <= COINCIDENCE_TOL * np.maximum(np.abs(tau), 1.0)
    quotient = np.empty(np.broadcast(lam_j, tau).shape)
    safe = np.where(coincide, 1.0, diff)
    quotient[...] = (smoothed_j - smoothed_tau) / safe
    if np.any(coincide):
        slope = np.broadcast_to(smoothed_derivative(spec, lam, tau, 1), quotient.shape)
        quotient = np.where(coincide, slope, quotient)
    return quotient * decomp.beta0(diff) / (lam_j + tau)


def lp_symbols(
    decomp: DyadicDecomposition, lam: float, lam_j: float, tau: float, ell: int, sign: int
) -> SymbolValues:
    """``m0``, ``m_ℓ^±`` and ``R_ℓ`` at one ``(λ_j, τ)``.

    Raises:
        RangeError: outside ``λ/2 <= τ <= 10λ``, ``λ_j <= 10λ``, or ``2^ℓ <= ε``.
    """

    _check_regime(lam, lam_j, tau)
    if ell <= decomp.ell0:
        raise RangeError(f"level {ell} is not above the mollifier level {decomp.ell0}")
    if sign not in (-1, 1):
        raise InvalidInputError(f"sign must be -1 or 1, got {sign!r}")
    lj = np.array([float(lam_j)])
    t = np.array([float(tau)])
    smoothed_j = smoothed_values(decomp.mollifier, lam, lj)
    r = _r_symbol(lj, t, ell)
    offset = 1.0 if sign < 0 else 0.0
    return SymbolValues(
        m0=float(_m0_symbol(decomp, lam, lj, t, smoothed_j)[0]),
        m=float((r * (smoothed_j - offset))[0]),
        r=float(r[0]),
        sign=sign,
    )


@dataclass(frozen=True)
class SymbolCertificate:
    symbol: str
    ell: int
    nu: int
    constant: float
    refined: float

    @property
    def stable(self) -> bool:
        if self.constant == self.refined:
            return True
        return abs(self.refined - self.constant) <= 0.1 * max(abs(self.constant), abs(self.refined))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "symbol": self.symbol,
            "ell": self.ell,
            "nu": self.nu,
            "constant": self.constant,
            "refined": self.refined,
            "stable": self.stable,
        }


def _band_taus(lam: float, band: Tuple[float, float], count: int) -> np.ndarray:
    lo = max(band[0], 0.5 * lam)
    hi = min(band[1], 10.0 * lam)
    if hi <= lo:
        raise RangeError(f"band {band!r} does not meet [lambda/2, 10 lambda] for lambda={lam!r}")
    taus = np.linspace(lo, hi, count)
    # Bands are open on the left.
    return taus[taus > band[0]]


def _lambda_j_grid(lam: float, taus: np.ndarray, reach: float, eps: float, count: int) -> np.ndarray:
    lo = max(0.0, float(taus[0]) - reach)
    hi = min(10.0 * lam, float(taus[-1]) + reach)
    coarse = np.linspace(lo, hi, count)
    fine = np.linspace(max(lo, lam - FINE_HALF_WIDTH * eps), min(hi, lam + FINE_HALF_WIDTH * eps), count)
    return np.unique(np.concatenate((coarse, fine)))


def _dyadic_constants(
    decomp: DyadicDecomposition, lam: float, ell: int, nu: int, sign: int, order: int, count: int
) -> Tuple[float, float]:
    width = math.ldexp(1.0, ell)
    taus = _band_taus(lam, decomp.band(lam, ell, nu, sign), count)
    lam_j = _lambda_j_grid(lam, taus, 2.0 * width, decomp.epsilon, 4 * count)
    factor = smoothed_values(decomp.mollifier, lam, lam_j) - (1.0 if sign < 0 else 0.0)
    step = DERIVATIVE_STEP * min(decomp.epsilon, width)
    lj = lam_j[:, None]
    t = taus[None, :]
    r = _r_symbol(lj, t, ell)
    dr = (_r_symbol(lj, t + step, ell) - _r_symbol(lj, t - step, ell)) / (2.0 * step)
    m = factor[:, None] * r
    dm = factor[:, None] * dr
    scale = width * lam
    constant_m = float(np.max(np.abs(m) + width * np.abs(dm))) * scale * (1.0 + nu) ** order
    constant_r = float(np.max(np.abs(r) + np.abs(dr))) * scale
    return constant_m, constant_r


def certify_symbol_bounds(
    decomp: DyadicDecomposition,
    lam: float,
    ell: int,
    nu: int,
    sign: int,
    order: int = 4,
    samples: int = 128,
) -> Tuple[SymbolCertificate, SymbolCertificate]:
    """Certified constants for the ``m_ℓ^±`` and ``R_ℓ`` symbol bounds.

    Over ``τ ∈ I^±_{ℓ,ν} ∩ [λ/2, 10λ]`` and every ``λ_j`` within ``2^{ℓ+1}`` of
    the band, reports

        C_m = max(|m| + 2^ℓ |∂_τ m|) · 2^ℓ λ (1+ν)^N
        C_R = max(|R| + |∂_τ R|) · 2^ℓ λ

    at ``samples`` τ points and again on the nested grid with twice the density.
    """

    if ell <= decomp.ell0:
        raise RangeError(f"level {ell} is not above the mollifier level {decomp.ell0}")
    if sign not in (-1, 1):
        raise InvalidInputError(f"sign must be -1 or 1, got {sign!r}")
    coarse = _dyadic_constants(decomp, lam, ell, nu, sign, order, samples)
    fine = _dyadic_constants(decomp, lam, ell, nu, sign, order, 2 * samples - 1)
    label = "m-" if sign < 0 else "m+"
    logger.debug("symbol constants l=%d nu=%d %s: %r -> %r", ell, nu, label, coarse, fine)
    return (
        SymbolCertificate(label, ell, nu, coarse[0], fine[0]),
        SymbolCertificate("R", ell, nu, coarse[1], fine[1]),
    )


def _m0_constant(
    decomp: DyadicDecomposition, lam: float, nu: int, sign: int, order: int, count: int
) -> float:
    eps = decomp.epsilon
    ell0 = decomp.ell0
    taus = _band_taus(lam, decomp.band(lam, ell0, nu, sign), count)
    lam_j = _lambda_j_grid(lam, taus, math.ldexp(2.0, ell0), eps, 4 * count)
    smoothed_j = smoothed_values(decomp.mollifier, lam, lam_j)[:, None]
    lj = lam_j[:, None]
    step = DERIVATIVE_STEP * eps
    m0 = _m0_symbol(decomp, lam, lj, taus[None, :], smoothed_j)
    ahead = _m0_symbol(decomp, lam, lj, taus[None, :] + step, smoothed_j)
    behind = _m0_symbol(decomp, lam, lj, taus[None, :] - step, smoothed_j)
    dm0 = (ahead - behind) / (2.0 * step)
    return float(np.max(np.abs(m0) + eps * np.abs(dm0))) * eps * lam * (1.0 + nu) ** order


def certify_m0_bound(
    decomp: DyadicDecomposition, lam: float, nu: int, sign: int, order: int = 4, samples: int = 64
) -> SymbolCertificate:
    """``C_0 = max(|m0| + ε|∂_τ m0|) · ε λ (1+ν)^N`` over ``I^±_{ℓ0,ν}``."""

    if sign not in (-1, 1):
        raise InvalidInputError(f"sign must be -1 or 1, got {sign!r}")
    coarse = _m0_constant(decomp, lam, nu, sign, order, samples)
    fine = _m0_constant(decomp, lam, nu, sign, order, 2 * samples - 1)
    return SymbolCertificate("m0", decomp.ell0, nu, coarse, fine)
