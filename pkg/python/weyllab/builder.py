"""Potential builder and the ``V = ...`` expression grammar."""

from __future__ import annotations

import re
from typing import Dict, List, Tuple

from .errors import InvalidInputError
from .potentials import (
    ArrayFunction,
    PotentialSpec,
    PotentialTerm,
    bounded,
    constant,
    inverse_power,
    zero,
)

_TERM_PATTERN = re.compile(r"^\s*([a-z_]+)\s*\((.*)\)\s*$", re.DOTALL)

# Positional parameter order per term name.
_TERM_PARAMETERS: Dict[str, Tuple[str, ...]] = {
    "zero": (),
    "constant": ("value",),
    "inverse_power": ("x0", "y0", "alpha", "strength"),
}


class PotentialBuilder:
    """Incrementally build a potential as an ordered sum of terms.

    Terms keep their insertion order so the emitted expression is stable.
    """

    def __init__(self) -> None:
        self._terms: List[PotentialTerm] = []

    @property
    def terms(self) -> List[PotentialTerm]:
        """Current list of terms (read-only snapshot)."""

        return list(self._terms)

    def add_term(self, term: PotentialTerm) -> None:
        """Append a pre-built term object."""

        self._terms.append(term)

    def zero(self) -> None:
        """Append the zero potential."""

        self._terms.append(zero())

    def constant(self, value: float) -> None:
        """Append a constant term."""

        self._terms.append(constant(value))

    def bounded(self, function: ArrayFunction, sup: float, name: str = "bounded") -> None:
        """Append a bounded term with its sup-norm bound."""

        self._terms.append(bounded(function, sup, name))

    def inverse_power(self, x0: float, y0: float, alpha: float, strength: float = 1.0) -> None:
        """Append ``strength * |x - (x0, y0)|**-alpha``."""

        self._terms.append(inverse_power(x0, y0, alpha, strength))

    def build(self) -> PotentialSpec:
        """Finalize and return a PotentialSpec."""

        return PotentialSpec(tuple(self._terms))

    def to_expression(self) -> str:
        return self.build().to_expression()


def _split_top_level(text: str, separator: str) -> List[str]:
    parts: List[str] = []
    depth = 0
    current: List[str] = []
    for index, char in enumerate(text):
        if char == "(":
            depth += 1
        elif char == ")":
            depth -= 1
            if depth < 0:
                raise InvalidInputError(f"unbalanced ')' at position {index} in {text!r}")
        if char == separator and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(char)
    if depth != 0:
        raise InvalidInputError(f"unbalanced '(' in {text!r}")
    parts.append("".join(current))
    return parts


def _parse_number(raw: str, context: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise InvalidInputError(f"{context}: {raw!r} is not a number") from exc


def _add_parsed_term(builder: PotentialBuilder, chunk: str) -> None:
    match = _TERM_PATTERN.match(chunk)
    if match is None:
        raise InvalidInputError(f"cannot parse potential term {chunk.strip()!r}")
    name, body = match.group(1), match.group(2).strip()
    if name == "bounded":
        raise InvalidInputError("bounded terms are only available programmatically")
    if name not in _TERM_PARAMETERS:
        raise InvalidInputError(f"unknown potential term {name!r}")
    expected = _TERM_PARAMETERS[name]
    values: Dict[str, float] = {}
    if body:
        for position, argument in enumerate(body.split(",")):
            key, sep, raw = argument.partition("=")
            if sep:
                key = key.strip()
                if key not in expected:
                    raise InvalidInputError(f"{name}() has no parameter {key!r}")
            else:
                if position >= len(expected):
                    raise InvalidInputError(f"too many arguments for {name}()")
                key, raw = expected[position], argument
            if key in values:
                raise InvalidInputError(f"{name}() got {key!r} twice")
            values[key] = _parse_number(raw.strip(), f"{name}({key})")
    if name == "zero":
        builder.zero()
    elif name == "constant":
        if "value" not in values:
            raise InvalidInputError("constant() needs a value")
        builder.constant(values["value"])
    else:
        missing = [key for key in ("x0", "y0", "alpha") if key not in values]
        if missing:
            raise InvalidInputError(f"inverse_power() missing {', '.join(missing)}")
        builder.inverse_power(
            values["x0"], values["y0"], values["alpha"], values.get("strength", 1.0)
        )


def parse_potential(text: str) -> PotentialSpec:
    """Parse ``inverse_power(x0=..,y0=..,alpha=..,strength=..) + constant(c) + ...``.

    A leading ``V =`` is accepted; an empty expression is the zero potential.
    """

    expression = text.strip()
    if expression.startswith("V") and "=" in expression.split("(", 1)[0]:
        expression = expression.split("=", 1)[1].strip()
    builder = PotentialBuilder()
    if not expression:
        builder.zero()
        return builder.build()
    for chunk in _split_top_level(expression, "+"):
        if not chunk.strip():
            raise InvalidInputError(f"empty term in potential {text!r}")
        _add_parsed_term(builder, chunk)
    return builder.build()
