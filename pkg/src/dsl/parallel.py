"""Order-preserving map over independent tasks, serial or in worker processes."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np


def pmap(fn, items, workers: int = 1, chunksize: int = 1) -> list:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))


def derive_seed(base_seed: int, index: int) -> int:
    """Independent 64-bit seed for task ``index`` of a run seeded with ``base_seed``."""
    ss = np.random.SeedSequence([int(base_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
