"""Ordered thread-pool map capped by ``WEYL_LAB_THREADS``."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from .errors import InvalidInputError

logger = logging.getLogger(__name__)

THREADS_ENV = "WEYL_LAB_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def thread_limit(default: Optional[int] = None) -> int:
    """Worker count from ``WEYL_LAB_THREADS``, else ``default``, else the CPU count."""

    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError as exc:
            raise InvalidInputError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from exc
        if value < 1:
            raise InvalidInputError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        return value
    if default is not None:
        return max(1, default)
    return max(1, os.cpu_count() or 1)


def ordered_map(func: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """``[func(item) for item in items]`` computed on a thread pool.

    Results come back in submission order, so any reduction over them is
    deterministic. With one worker the map runs inline.
    """

    work = list(items)
    count = min(thread_limit(workers), max(1, len(work)))
    if count == 1:
        return [func(item) for item in work]
    logger.debug("mapping %d items on %d threads", len(work), count)
    with ThreadPoolExecutor(max_workers=count) as pool:
        return list(pool.map(func, work))
