# src/pdw/partitions.py
from __future__ import annotations
from typing import Any, Dict, List

import numpy as np

from src.pdw.errors import PartitionError
from src.pdw.types import NOISE, LabelVector, Partition, check_label_vector


def partition_from_labels(labels: Any) -> Partition:
    """One block per distinct label; every NOISE index becomes its own singleton."""
    arr = check_label_vector(labels, allow_noise=True)
    if arr.size == 0:
        raise PartitionError("cannot build a partition from an empty label vector")
    blocks: Dict[Any, List[int]] = {}
    for i, lab in enumerate(arr.tolist()):
        key = ("noise", i) if lab == NOISE else lab
        blocks.setdefault(key, []).append(i)
    return Partition(blocks=list(blocks.values()))


def labels_from_partition(p: Partition) -> LabelVector:
    """Canonical labels: blocks numbered in order of their smallest member."""
    out = np.empty(p.n, dtype=np.int64)
    for label, block in enumerate(p.blocks):
        out[list(block)] = label
    return out


def canonicalize_labels(labels: Any) -> LabelVector:
    """Renumber by first occurrence; NOISE stays -1."""
    arr = check_label_vector(labels, allow_noise=True)
    out = np.full(arr.shape, NOISE, dtype=np.int64)
    mapping: Dict[int, int] = {}
    for i, lab in enumerate(arr.tolist()):
        if lab == NOISE:
            continue
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out
