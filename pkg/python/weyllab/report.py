"""CSV, JSON and SVG artifacts with byte-stable output."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import InvalidInputError  # noqa: E402
from .types import float_row, frozen_array, stable_json  # noqa: E402

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# Fixed salt and no timestamp keep SVG ids and metadata identical across runs.
_SVG_RC = {"svg.hashsalt": "weyllab", "svg.fonttype": "path"}


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a comma-separated file with a header row and 17-digit floats."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            if len(row) != len(header):
                raise InvalidInputError(f"row has {len(row)} fields, header has {len(header)}")
            writer.writerow(float_row(row))
    logger.info("wrote %s", path)
    return path


def write_json(path: PathLike, payload: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(stable_json(payload), encoding="utf-8")
    logger.info("wrote %s", path)
    return path


@dataclass(frozen=True, eq=False)
class Curve:
    """One polyline (or a single marker when it has one point)."""

    label: str
    x: np.ndarray
    y: np.ndarray

    @classmethod
    def of(cls, label: str, x: Sequence[float], y: Sequence[float]) -> "Curve":
        xs = frozen_array(x)
        ys = frozen_array(y)
        if xs.shape != ys.shape or xs.ndim != 1:
            raise InvalidInputError(f"curve {label!r} needs matching 1-D x and y")
        return cls(label=label, x=xs, y=ys)


def emit_svg(
    path: PathLike,
    curves: Sequence[Curve],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    logx: bool = False,
    logy: bool = False,
    reference: Optional[float] = None,
) -> Path:
    """Render curves as a standalone SVG line plot.

    Args:
        path: Output file.
        curves: Nonempty list of nonempty curves.
        title: Figure title.
        xlabel: Horizontal axis label.
        ylabel: Vertical axis label.
        logx: Logarithmic horizontal axis.
        logy: Logarithmic vertical axis.
        reference: Optional horizontal reference line.

    Returns:
        The written path.
    """

    if not curves or any(curve.x.size == 0 for curve in curves):
        raise InvalidInputError("emit_svg needs at least one nonempty curve")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        try:
            for curve in curves:
                if curve.x.size == 1:
                    ax.plot(curve.x, curve.y, marker="o", linestyle="none", label=curve.label)
                else:
                    ax.plot(curve.x, curve.y, linewidth=1.2, label=curve.label)
            if reference is not None:
                ax.axhline(reference, linewidth=0.8, color="0.5")
            if logx:
                ax.set_xscale("log")
            if logy:
                ax.set_yscale("log")
            ax.set_title(title)
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            if len(curves) > 1:
                ax.legend(frameon=False, fontsize=9)
            fig.tight_layout()
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    logger.info("wrote %s", path)
    return path
