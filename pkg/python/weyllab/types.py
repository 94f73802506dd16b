"""Typed, stable serialization helpers shared by every report."""

from __future__ import annotations

import json
import math
from typing import Any, Iterable, List, Mapping

import numpy as np

from .errors import InvalidInputError

REPORT_SCHEMA_VERSION = "1.0"

# Seventeen significant digits round-trip every IEEE double.
FLOAT_FORMAT = "{:.17g}"
JSON_INDENT = "  "


def _require_bool(value: Any, field_name: str) -> bool:
    if not isinstance(value, bool):
        raise InvalidInputError(
            f"{field_name} must be bool, got {type(value).__name__}"
        )
    return value


def _require_int(value: Any, field_name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise InvalidInputError(f"{field_name} must be int, got {type(value).__name__}")
    return int(value)


def _require_float(value: Any, field_name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, np.number)):
        raise InvalidInputError(
            f"{field_name} must be float, got {type(value).__name__}"
        )
    result = float(value)
    if not math.isfinite(result):
        raise InvalidInputError(f"{field_name} must be finite, got {result!r}")
    return result


def _require_positive(value: Any, field_name: str) -> float:
    result = _require_float(value, field_name)
    if result <= 0.0:
        raise InvalidInputError(f"{field_name} must be positive, got {result!r}")
    return result


def format_float(value: float) -> str:
    """Format a float with the fixed report precision."""

    return FLOAT_FORMAT.format(float(value))


def frozen_array(values: Iterable[float] | np.ndarray, dtype: Any = float) -> np.ndarray:
    """Return a read-only copy of ``values``."""

    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


def to_builtin(value: Any) -> Any:
    """Convert numpy scalars/arrays and nested containers into JSON-ready values."""

    if isinstance(value, Mapping):
        return {str(key): to_builtin(item) for key, item in value.items()}
    if isinstance(value, np.ndarray):
        return [to_builtin(item) for item in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [to_builtin(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        result = float(value)
        if math.isnan(result):
            return None
        if math.isinf(result):
            return "inf" if result > 0 else "-inf"
        return result
    return value


def _encode_json(value: Any, level: int) -> str:
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, (dict, list)) and not value:
        return "{}" if isinstance(value, dict) else "[]"
    pad = "\n" + JSON_INDENT * (level + 1)
    close = "\n" + JSON_INDENT * level
    if isinstance(value, dict):
        items = [f"{json.dumps(key)}: {_encode_json(value[key], level + 1)}" for key in sorted(value)]
        return "{" + pad + ("," + pad).join(items) + close + "}"
    if isinstance(value, list):
        items = [_encode_json(item, level + 1) for item in value]
        return "[" + pad + ("," + pad).join(items) + close + "]"
    return json.dumps(value)


def stable_json(payload: Mapping[str, Any]) -> str:
    """Serialize a report with sorted keys so identical input gives identical bytes.

    The layout matches ``json.dumps(..., indent=2, sort_keys=True)``; floats are
    written with :data:`FLOAT_FORMAT`, the precision the CSV files use.
    """

    return _encode_json(to_builtin(payload), 0) + "\n"


def float_row(values: Iterable[Any]) -> List[str]:
    """Format one CSV row, leaving ints and strings untouched."""

    row: List[str] = []
    for value in values:
        if isinstance(value, (bool, np.bool_)):
            row.append("1" if value else "0")
        elif isinstance(value, (int, np.integer)):
            row.append(str(int(value)))
        elif isinstance(value, (float, np.floating)):
            row.append(format_float(value))
        else:
            row.append(str(value))
    return row
