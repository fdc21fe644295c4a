from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from logging import getLogger
from typing import Callable, Iterable, TypeVar

import config

_LOGGER = getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """Apply func to every item; results come back in input order for any worker count."""
    items = list(items)
    threads = min(threads or config.THREADS, max(len(items), 1))
    if threads <= 1:
        return [func(item) for item in items]
    _LOGGER.debug("fanning out %d tasks over %d threads", len(items), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
