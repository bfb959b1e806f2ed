"""Index-ordered parallel map over contiguous ranges.

Work is split into ``[start, stop)`` ranges; results are concatenated in
index order, so output never depends on completion order or worker count as
long as each index draws from its own substream.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable

_default_workers = 1


def set_default_workers(n: int) -> None:
    global _default_workers
    _default_workers = max(1, int(n))


def default_workers() -> int:
    return _default_workers


def map_ranges(func: Callable[[int, int], list], n: int, workers: int | None = None, chunks_per_worker: int = 4) -> list:
    """Call ``func(start, stop)`` over a partition of ``range(n)`` and concatenate.

    `func` must be picklable when ``workers > 1``.
    """
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or n < 2:
        return list(func(0, n))
    n_chunks = min(n, workers * chunks_per_worker)
    edges = [round(i * n / n_chunks) for i in range(n_chunks + 1)]
    starts, stops = edges[:-1], edges[1:]
    out: list = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(func, starts, stops):
            out.extend(part)
    return out
