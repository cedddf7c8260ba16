"""Ordered map over a process pool (or in-process when workers <= 1)."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "FRONTLAB_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def ordered_map(fn, jobs, workers=None) -> list:
    """[fn(j) for j in jobs], results in job order regardless of completion order."""
    jobs = list(jobs)
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def ordered_imap(fn, jobs, workers=None):
    """Lazy variant of ordered_map: yields each result as soon as it and all
    earlier ones are done, so callers can persist progress."""
    jobs = list(jobs)
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(jobs) <= 1:
        for j in jobs:
            yield fn(j)
        return
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        yield from pool.map(fn, jobs)
