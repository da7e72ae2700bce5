"""Deterministic chunked execution over independent imaging work units.

Grid points are independent, so chunks may run on any number of threads; each
chunk writes a disjoint output slice and its internal sums run in a fixed
serial order, making results bitwise independent of the schedule.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "POLARMIG_THREADS"


def thread_count() -> int:
    raw = os.environ.get(ENV_THREADS, "")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {raw!r}")
        if n < 1:
            raise ValueError(f"{ENV_THREADS} must be >= 1")
        return n
    return min(4, os.cpu_count() or 1)


def run_chunks(total: int, chunk: int, work) -> None:
    """Invoke ``work(lo, hi)`` over consecutive index ranges covering total."""
    ranges = [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]
    n_threads = thread_count()
    if n_threads <= 1 or len(ranges) <= 1:
        for lo, hi in ranges:
            work(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        futures = [pool.submit(work, lo, hi) for lo, hi in ranges]
        for fut in futures:
            fut.result()
