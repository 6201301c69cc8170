# src/metrics/contingency.py
from __future__ import annotations
import math
from typing import Any, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.pdw.errors import PartitionError
from src.pdw.partitions import labels_from_partition, partition_from_labels
from src.pdw.types import Partition

PartitionLike = Union[Partition, np.ndarray, list]


def as_partition(x: Any) -> Partition:
    """Partitions pass through; label vectors are converted (NOISE -> singletons)."""
    if isinstance(x, Partition):
        return x
    return partition_from_labels(x)


class ContingencyTable(BaseModel):
    """n_ij = |U_i ∩ V_j| with row sums a_i = |U_i|, column sums b_j = |V_j|."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    counts: np.ndarray
    row_sums: np.ndarray
    col_sums: np.ndarray
    n: int

    @property
    def shape(self):
        return self.counts.shape


def contingency(u: PartitionLike, v: PartitionLike) -> ContingencyTable:
    pu, pv = as_partition(u), as_partition(v)
    if pu.n != pv.n:
        raise PartitionError(f"partitions cover different ground sets ({pu.n} vs {pv.n} points)")
    cu, cv = labels_from_partition(pu), labels_from_partition(pv)
    counts = np.zeros((len(pu), len(pv)), dtype=np.int64)
    np.add.at(counts, (cu, cv), 1)
    return ContingencyTable(
        counts=counts,
        row_sums=counts.sum(axis=1),
        col_sums=counts.sum(axis=0),
        n=int(pu.n),
    )


def entropy_from_sizes(sizes: np.ndarray, n: int) -> float:
    """Entropy (nats) of a partition given its block sizes."""
    s = np.asarray(sizes, dtype=np.float64)
    s = s[s > 0]
    if n == 0 or s.size <= 1:
        return 0.0
    p = s / n
    return -math.fsum((p * np.log(p)).tolist())


def entropy(p: PartitionLike) -> float:
    part = as_partition(p)
    return entropy_from_sizes(part.sizes(), part.n)
