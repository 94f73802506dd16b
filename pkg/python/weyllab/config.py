"""Plain-text experiment configuration.

A config file is a list of ``key = value`` lines; ``#`` starts a comment and
``-`` in keys is read as ``_``. ``V = <expression>`` sets the potential. Lists
are comma separated. :meth:`ExperimentConfig.to_text` emits every key in
sorted order with canonical values, so emitting a parsed config is idempotent.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from .builder import parse_potential
from .errors import InvalidInputError
from .geometry import BoundaryCondition, DomainSpec, Shape, make_domain
from .potentials import PotentialSpec
from .types import _require_float, _require_int, _require_positive

logger = logging.getLogger(__name__)

SOURCES = ("exact", "grid")
_ALIASES = {"v": "potential", "potential_expression": "potential"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a subcommand needs; CLI flags override file values."""

    shape: str = Shape.RECTANGLE.value
    a: float = 1.0
    b: float = 1.0
    radius: float = 1.0
    bc: str = "dirichlet"
    potential: str = "zero()"
    h: float = 1.0 / 33.0
    eps: float = 0.5
    lambda_min: float = 10.0
    lambda_max: float = 100.0
    lambda_step: float = 1.0
    times: Tuple[float, ...] = (0.01,)
    ells: Tuple[int, ...] = (0, 1, 2)
    source: str = "exact"
    samples: int = 10_000
    seed: int = 0
    out: str = "weyl-lab-out"

    def __post_init__(self) -> None:
        if self.shape not in {shape.value for shape in Shape}:
            raise InvalidInputError(f"config 'shape' must be rectangle or disk, got {self.shape!r}")
        BoundaryCondition.parse(self.bc)
        parse_potential(self.potential)
        for name in ("a", "b", "radius", "h", "lambda_min", "lambda_max", "lambda_step"):
            object.__setattr__(self, name, _require_positive(getattr(self, name), f"config '{name}'"))
        eps = _require_positive(self.eps, "config 'eps'")
        if eps > 1.0:
            raise InvalidInputError(f"config 'eps' must lie in (0, 1], got {eps!r}")
        object.__setattr__(self, "eps", eps)
        if self.lambda_max < self.lambda_min:
            raise InvalidInputError("config 'lambda_max' is below 'lambda_min'")
        object.__setattr__(
            self, "times", tuple(_require_positive(t, "config 'times'") for t in self.times)
        )
        object.__setattr__(self, "ells", tuple(_require_int(ell, "config 'ells'") for ell in self.ells))
        if self.source not in SOURCES:
            raise InvalidInputError(f"config 'source' must be one of {SOURCES}, got {self.source!r}")
        if _require_int(self.samples, "config 'samples'") < 1:
            raise InvalidInputError("config 'samples' must be positive")
        _require_int(self.seed, "config 'seed'")

    # -- derived objects --------------------------------------------------

    def domain(self) -> DomainSpec:
        if self.shape == Shape.DISK.value:
            return make_domain(Shape.DISK, radius=self.radius)
        return make_domain(Shape.RECTANGLE, a=self.a, b=self.b)

    def boundary(self) -> BoundaryCondition:
        return BoundaryCondition.parse(self.bc)

    def potential_spec(self) -> PotentialSpec:
        return parse_potential(self.potential)

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """Copy with the non-``None`` overrides applied."""

        changes = {key: value for key, value in overrides.items() if value is not None}
        unknown = set(changes) - {field.name for field in dataclasses.fields(self)}
        if unknown:
            raise InvalidInputError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return dataclasses.replace(self, **changes)

    # -- text form --------------------------------------------------------

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        fields = {field.name: field for field in dataclasses.fields(cls)}
        values: Dict[str, Any] = {}
        for raw_key, raw_value in data.items():
            key = _normalize_key(raw_key)
            if key not in fields:
                raise InvalidInputError(f"unknown config key {raw_key!r}")
            values[key] = _coerce(key, raw_value, fields[key].type)
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        return {field.name: getattr(self, field.name) for field in dataclasses.fields(self)}

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        values: Dict[str, str] = {}
        for number, line in enumerate(text.splitlines(), start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise InvalidInputError(f"config line {number}: expected 'key = value', got {line!r}")
            key, value = (part.strip() for part in stripped.split("=", 1))
            if not key:
                raise InvalidInputError(f"config line {number}: empty key")
            values[key] = value
        return cls.from_dict(values)

    def to_text(self) -> str:
        lines = []
        for key, value in sorted(self.to_dict().items()):
            if key == "potential":
                rendered = parse_potential(value).to_expression()
                lines.append(f"V = {rendered}")
                continue
            lines.append(f"{key} = {_render(value)}")
        return "\n".join(lines) + "\n"


def _normalize_key(key: str) -> str:
    normalized = key.strip().lower().replace("-", "_")
    return _ALIASES.get(normalized, normalized)


def _coerce(key: str, value: Any, annotation: Any) -> Any:
    kind = str(annotation)
    if not isinstance(value, str):
        return tuple(value) if "Tuple" in kind and not isinstance(value, tuple) else value
    text = value.strip()
    try:
        if "Tuple[float" in kind:
            return tuple(float(item) for item in text.split(",") if item.strip())
        if "Tuple[int" in kind:
            return tuple(int(item) for item in text.split(",") if item.strip())
        if kind == "float":
            return _require_float(_parse_float(text), f"config '{key}'")
        if kind == "int":
            return int(text)
    except ValueError as exc:
        raise InvalidInputError(f"config '{key}': cannot parse {value!r}") from exc
    return text


def _parse_float(text: str) -> float:
    if "/" in text:
        numerator, denominator = text.split("/", 1)
        return float(numerator) / float(denominator)
    return float(text)


def _render(value: Any) -> str:
    if isinstance(value, tuple):
        return ", ".join(_render(item) for item in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def load_config(path: Optional[Union[str, Path]]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    config_path = Path(path)
    try:
        text = config_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {config_path}: {exc}") from exc
    logger.debug("loaded config %s", config_path)
    return ExperimentConfig.from_text(text)
