"""Ordered parallel map over independent tasks.

The worker count is ``os.cpu_count()`` capped by ``DIRAC_SPECTRA_THREADS``.  Results
come back in input order, so reductions over them are deterministic regardless of
scheduling.  Nested calls from inside a worker run serially.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Optional, TypeVar

T = TypeVar("T")
U = TypeVar("U")

ENV_VAR = "DIRAC_SPECTRA_THREADS"
_IN_WORKER = False


def _mark_worker():
    global _IN_WORKER
    _IN_WORKER = True


def worker_count(requested: Optional[int] = None) -> int:
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get(ENV_VAR)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            pass
    return max(1, n)


def parallel_map(fn: Callable[[T], U], items: Iterable[T], workers: Optional[int] = None) -> list[U]:
    """``[fn(x) for x in items]``, computed in worker processes when more than one is
    available.  ``fn`` and the items must be picklable."""
    items = list(items)
    n = min(worker_count(workers), len(items))
    if n <= 1 or _IN_WORKER:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n, initializer=_mark_worker) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * n))))
