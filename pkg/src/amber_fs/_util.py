import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

# seed-stream tags
RM, AE, SPLIT, FINAL, RANKER, VALIDATION = range(1, 7)


def derive_seed(*parts):
    """A 64-bit seed that depends deterministically on every integer in ``parts``."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, dtype=np.uint64)[0])


def worker_count():
    raw = os.environ.get("AMBER_THREADS", "")
    if raw.strip():
        return max(1, int(raw))
    return os.cpu_count() or 1


def map_ordered(fn, items, workers=None):
    """``[fn(x) for x in items]``, possibly on a thread pool; results keep input order."""
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
