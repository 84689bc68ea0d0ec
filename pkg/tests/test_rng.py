import numpy as np

from cbss.rng import chunk_sizes, parallel_map, substream, substream_seed


def _draw(task):
    seed, key = task
    return substream(seed, key).random(3).tolist()


def test_substreams_reproducible_and_distinct():
    a = substream(5, 1, 2).random(4)
    assert np.array_equal(a, substream(5, 1, 2).random(4))
    assert not np.array_equal(a, substream(5, 2, 1).random(4))
    assert substream_seed(5, 0) == substream_seed(5, 0) != substream_seed(5, 1)


def test_chunk_layout():
    assert chunk_sizes(10, 4) == [4, 4, 2]
    assert chunk_sizes(8, 4) == [4, 4]
    assert sum(chunk_sizes(123457, 1000)) == 123457


def test_parallel_map_order_independent_of_workers():
    tasks = [(3, k) for k in range(6)]
    assert parallel_map(_draw, tasks, 1) == parallel_map(_draw, tasks, 3)
