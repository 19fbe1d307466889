"""Block-based batching for streaming covariance estimation.

Iterates are grouped into consecutive blocks with anchors a_1 = 1 < a_2 < ...
A new block starts at iteration i once the current block length i - a + 1
reaches a trigger value. The batch at iteration i spans the two most recent
blocks, so its length is l_i = i - a_{m-1} + 1 when a_m <= i < a_{m+1}. Only
the two partial block sums (S0, S1) are kept, which makes the batch sum and
batch length O(1)-updatable.

Two trigger families are used:

* de-biased estimator: block length reaches floor(i^alpha * ln i), with an
  optional scale constant applied to the anchor sequence (``scale=0.5`` means
  the anchors of the unscaled sequence are halved, which the trigger emulates
  as floor(scale * (i/scale)^alpha * ln(i/scale))).
* batch-means baseline: block length reaches floor(scale * i^((1+alpha)/2)),
  the growth implied by polynomially spaced anchors without the log factor.
"""

import math
from typing import Callable, NamedTuple

import numpy as np


def threshold(i: int, alpha: float, c: float = 1.0) -> int:
    """Block-length trigger floor(c * i^alpha * ln i). Zero at i = 1."""
    if i < 1:
        raise ValueError(f"threshold undefined for i < 1, got i={i}")
    return int(math.floor(c * float(i) ** alpha * math.log(i)))


def scaled_trigger(i: int, alpha: float, scale: float = 1.0) -> int:
    """Trigger that emulates scaling the anchor sequence by ``scale``.

    Equals threshold(i, alpha, 1) when scale == 1. For scale != 1 the block
    length at anchor i matches the gap of the scaled anchor sequence, i.e.
    floor(scale * (i/scale)^alpha * ln(i/scale)); this is not the same as
    multiplying threshold() by scale.
    """
    if i < 1:
        raise ValueError(f"trigger undefined for i < 1, got i={i}")
    u = i / scale
    if u <= 1.0:
        return 0
    return int(math.floor(scale * u ** alpha * math.log(u)))


def bm_trigger(i: int, alpha: float, scale: float) -> int:
    """Block-length trigger floor(scale * i^((1+alpha)/2)) for the BM baseline."""
    if i < 1:
        raise ValueError(f"trigger undefined for i < 1, got i={i}")
    return int(math.floor(scale * float(i) ** ((1.0 + alpha) / 2.0)))


class BatchSnapshot(NamedTuple):
    """Per-iteration batch view.

    batch_sum/length cover the two most recent blocks; block_sum/block_length
    cover the current block only (the non-overlapping view used by the
    batch-means baseline).
    """

    batch_sum: np.ndarray
    length: int
    block_sum: np.ndarray
    block_length: int


class BlockBatcher:
    """Streaming block state: current anchor, previous block length, S0, S1.

    ``update`` must be called exactly once per iteration with increasing i.
    """

    def __init__(self, dim: int, trigger: Callable[[int], int]):
        self.dim = dim
        self.trigger = trigger
        self.anchor = 1
        self.prev_len = 0
        self.s0 = np.zeros(dim)
        self.s1 = np.zeros(dim)
        self._last_i = 0

    def update(self, i: int, x) -> BatchSnapshot:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"iterate has shape {x.shape}, batcher dim {self.dim}")
        if i != self._last_i + 1:
            raise ValueError(
                f"iterations must be consumed in order: got i={i} after {self._last_i}"
            )
        self._last_i = i
        if i - self.anchor + 1 >= self.trigger(i):
            self.prev_len = i - self.anchor
            self.anchor = i
            self.s0 = self.s1
            self.s1 = x.copy()
        else:
            self.s1 = self.s1 + x
        block_length = i - self.anchor + 1
        return BatchSnapshot(
            batch_sum=self.s0 + self.s1,
            length=block_length + self.prev_len,
            block_sum=self.s1.copy(),
            block_length=block_length,
        )


def exact_block_anchors(alpha: float, i_max: int) -> np.ndarray:
    """Anchor sequence of the unscaled scheme up to i_max.

    a_1 = 1; each next anchor is the smallest i with
    i - a_prev + 1 >= floor(i^alpha * ln i). Because the floor grows by at
    most one per step, the crossing is an exact equality once the trigger
    exceeds 2 at the start of a block (i.e. for all but the first few
    anchors).
    """
    anchors = [1]
    a = 1
    i = 1
    while True:
        i += 1
        if i > i_max:
            break
        if i - a + 1 >= threshold(i, alpha):
            anchors.append(i)
            a = i
    return np.asarray(anchors, dtype=np.int64)


def batch_lengths(anchors: np.ndarray, i_max: int) -> np.ndarray:
    """Two-block batch length l_i for i = 1..i_max given the anchor sequence.

    For a_m <= i < a_{m+1}, l_i = i - a_{m-1} + 1; within the first block
    l_i = i - a_1 + 1 (there is no previous block).
    """
    lengths = np.empty(i_max, dtype=np.int64)
    m = 0
    for i in range(1, i_max + 1):
        while m + 1 < len(anchors) and anchors[m + 1] <= i:
            m += 1
        start = anchors[m - 1] if m >= 1 else anchors[0]
        lengths[i - 1] = i - start + 1
    return lengths


def batch_bounds_check(trace, alpha: float) -> bool:
    """True iff every (i, l_i) in the trace satisfies
    floor(i^alpha ln i) <= l_i <= 2 floor(i^alpha ln i)."""
    for i, length in trace:
        lo = threshold(int(i), alpha)
        if not (lo <= length <= 2 * lo):
            return False
    return True
