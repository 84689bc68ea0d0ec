"""Reproducible random substreams and a deterministic parallel map.

Every unit of work gets a stream derived from ``(root_seed, *task_key)`` by
``numpy.random.SeedSequence`` spawn keys, so the numbers a task sees never
depend on how many workers run or in which order tasks finish.
"""

from concurrent.futures import ProcessPoolExecutor

import numpy as np


def substream(root_seed, *key):
    """Counter-based (Philox) generator for task ``key`` under ``root_seed``."""
    ss = np.random.SeedSequence(int(root_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def substream_seed(root_seed, *key):
    """32-bit seed for compiled kernels, derived the same way as :func:`substream`."""
    ss = np.random.SeedSequence(int(root_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def chunk_sizes(n, chunk):
    """Split ``n`` into fixed-size chunks; the layout depends only on ``n`` and ``chunk``."""
    full, rest = divmod(int(n), int(chunk))
    return [int(chunk)] * full + ([rest] if rest else [])


def parallel_map(fn, tasks, workers=1):
    """Apply ``fn`` to each task and return results in task order.

    ``workers == 1`` runs inline. Otherwise a process pool is used; results
    are still collected in submission order so aggregation is deterministic.
    """
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=int(workers)) as pool:
        return list(pool.map(fn, tasks))
