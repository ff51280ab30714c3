"""Order-preserving parallel map used for replicates, grid cells and coverage reps."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor


def pmap(func, items, workers: int = 1, kind: str = "process") -> list:
    """``[func(x) for x in items]``, optionally spread over a pool.

    Results come back in input order, so a reduction over them is identical
    for any worker count. ``func`` must be picklable for process pools
    (module-level functions and ``functools.partial`` of them are).
    """
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    pool_cls = ProcessPoolExecutor if kind == "process" else ThreadPoolExecutor
    with pool_cls(max_workers=min(workers, len(items))) as pool:
        chunks = max(1, len(items) // (4 * workers))
        if kind == "process":
            return list(pool.map(func, items, chunksize=chunks))
        return list(pool.map(func, items))
