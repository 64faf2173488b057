"""Order-preserving parallel map over independent work items."""

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    """Workers allowed by ``RNNCAP_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("RNNCAP_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"RNNCAP_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("RNNCAP_THREADS must be non-negative")
    return n if n > 0 else (os.cpu_count() or 1)


def pmap(fn, items, workers=None):
    """``[fn(x) for x in items]``, possibly on a thread pool.

    Each item must carry its own seed so that results do not depend on
    scheduling.
    """
    items = list(items)
    workers = worker_count() if workers is None else max(1, int(workers))
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))
