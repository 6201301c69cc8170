# src/metrics/pairs.py
from __future__ import annotations

import numpy as np

from src.metrics.contingency import PartitionLike, as_partition, contingency
from src.pdw.errors import PartitionError


def _comb2(x) -> int:
    x = np.asarray(x, dtype=np.int64)
    return int((x * (x - 1) // 2).sum())


def _pair_counts(u: PartitionLike, v: PartitionLike):
    t = contingency(u, v)
    if t.n < 2:
        raise PartitionError(f"pair-counting indices need at least 2 points, got {t.n}")
    return _comb2(t.counts), _comb2(t.row_sums), _comb2(t.col_sums), t.n * (t.n - 1) // 2


def rand_index(u: PartitionLike, v: PartitionLike) -> float:
    """Fraction of the C(n,2) pairs on which the two partitions agree."""
    both, in_u, in_v, total = _pair_counts(u, v)
    return (total + 2 * both - in_u - in_v) / total


def adjusted_rand_index(u: PartitionLike, v: PartitionLike) -> float:
    both, in_u, in_v, total = _pair_counts(u, v)
    expected = in_u * in_v / total
    max_index = 0.5 * (in_u + in_v)
    if max_index == expected:
        # all-singletons or single-block on both sides
        return 1.0 if as_partition(u) == as_partition(v) else 0.0
    return (both - expected) / (max_index - expected)
