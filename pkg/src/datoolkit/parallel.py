"""Repetition runner honoring the DA_TOOLKIT_THREADS cap."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")


def thread_count() -> int:
    raw = os.environ.get("DA_TOOLKIT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def map_indexed(fn: Callable[[int], T], count: int) -> list[T]:
    """Run ``fn(i)`` for ``i in range(count)``, results in index order.

    Each call must derive its own RNG stream from the index, so the result
    is identical whether execution is sequential or parallel.
    """
    workers = thread_count()
    if workers <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=min(workers, count)) as pool:
        return list(pool.map(fn, range(count)))
