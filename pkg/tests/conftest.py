import numpy as np
import pytest

from sgdinfer.batching import BlockBatcher


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def stream_batches(xs, trigger):
    """Run a stream through a BlockBatcher, returning per-iteration
    (batch_sum, length, block_sum, block_length) arrays."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs[:, None]
    n, p = xs.shape
    batcher = BlockBatcher(p, trigger)
    sums = np.empty((n, p))
    lengths = np.empty(n, dtype=np.int64)
    block_sums = np.empty((n, p))
    block_lengths = np.empty(n, dtype=np.int64)
    for i in range(1, n + 1):
        snap = batcher.update(i, xs[i - 1])
        sums[i - 1] = snap.batch_sum
        lengths[i - 1] = snap.length
        block_sums[i - 1] = snap.block_sum
        block_lengths[i - 1] = snap.block_length
    return sums, lengths, block_sums, block_lengths
