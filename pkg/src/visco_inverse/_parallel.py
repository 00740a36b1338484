"""Optional thread pool over independent per-mode work items.

The env var ``VISCO_THREADS`` caps the worker count; unset or 1 means run
serially.  Results always come back in input order, so enabling threads
never changes any output.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    raw = os.environ.get("VISCO_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"VISCO_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


def parallel_map(fn, items) -> list:
    items = list(items)
    workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
