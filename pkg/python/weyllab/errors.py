"""Error kinds raised across the laboratory.

Input problems derive from ``ValueError`` and numerical or capacity failures
from ``RuntimeError``; every error also derives from ``WeylLabError`` so callers
can catch the whole family at once.
"""

from __future__ import annotations


class WeylLabError(Exception):
    """Base class for every error raised by :mod:`weyllab`."""


class InvalidInputError(WeylLabError, ValueError):
    """A parameter violates a documented precondition."""


class UnsupportedDomainError(WeylLabError, ValueError):
    """The requested operation is not available for this domain or condition."""


class SingularPointError(WeylLabError, ValueError):
    """A potential was evaluated exactly at one of its singular centers."""


class RangeError(WeylLabError, ValueError):
    """A spectral parameter lies outside the validity range of its source."""


class AccuracyError(WeylLabError, RuntimeError):
    """Two independent numerical routes or refinements disagree."""


class SplitFailureError(WeylLabError, RuntimeError):
    """No truncation level achieves the requested L1 bound."""


class CapacityError(WeylLabError, RuntimeError):
    """The problem exceeds the configured dense-solver limit."""


class SolverError(WeylLabError, RuntimeError):
    """The eigensolver failed to converge."""


class FitFailureError(WeylLabError, RuntimeError):
    """A constant-fitting certification could not be produced."""


class InvalidPairError(WeylLabError, RuntimeError):
    """Free and perturbed operators were not built on the same grid and shift."""
