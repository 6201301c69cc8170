# src/training/triplet.py
'''
Batch-all triplet loss within one pulse train.

A triplet (i, j, k) is valid when i and j share an emitter (i != j) and k comes
from another emitter. It is easy when d(i, j) + margin < d(i, k); the loss is
the mean hinge max(d(i, j) - d(i, k) + margin, 0) over all valid triplets that
are not easy. With no such triplet the loss is 0 and carries no gradient.
'''
from __future__ import annotations
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel

from src.numerics.tensor import Tensor
from src.pdw.types import check_label_vector

# anchors per mining chunk are chosen so a chunk's (a, n, n) masks stay near this many cells
_MINING_CELLS = 1 << 22


def pairwise_distances(z: Tensor) -> Tensor:
    """Euclidean distances between rows; exact zero diagonal, finite gradient at 0."""
    n, d = z.shape
    diff = z.reshape(n, 1, d) - z.reshape(1, n, d)
    return (diff * diff).sum(axis=-1).sqrt()


def _positive_negative_masks(labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    same = labels[:, None] == labels[None, :]
    positive = same & ~np.eye(labels.shape[0], dtype=bool)
    return positive, ~same


def mine_batch_all(d: Union[np.ndarray, Tensor], labels, margin: float) -> np.ndarray:
    """
    All valid, non-easy triplets as an (m, 3) int array of (anchor, positive,
    negative), in lexicographic order. (i, j) and (j, i) are distinct anchors.
    """
    dist = np.asarray(d.data if isinstance(d, Tensor) else d)
    labels = check_label_vector(labels, n=dist.shape[0])
    n = dist.shape[0]
    if n < 3:
        return np.zeros((0, 3), dtype=np.int64)
    positive, negative = _positive_negative_masks(labels)
    chunk = max(1, _MINING_CELLS // (n * n))
    found = []
    for start in range(0, n, chunk):
        a = slice(start, min(n, start + chunk))
        valid = positive[a, :, None] & negative[a, None, :]
        hard = dist[a, :, None] + margin >= dist[a, None, :]
        i, j, k = np.nonzero(valid & hard)
        found.append(np.stack([i + start, j, k], axis=1))
    return np.concatenate(found, axis=0).astype(np.int64)


def triplet_terms(z: Tensor, labels, margin: float) -> Tuple[Optional[Tensor], int]:
    """(sum of hinges over the mined triplets, triplet count); (None, 0) when nothing is mined."""
    d = pairwise_distances(z)
    triplets = mine_batch_all(d, labels, margin)
    if triplets.shape[0] == 0:
        return None, 0
    i, j, k = triplets[:, 0], triplets[:, 1], triplets[:, 2]
    hinge = (d[(i, j)] - d[(i, k)] + margin).relu()
    return hinge.sum(), int(triplets.shape[0])


def batch_all_triplet_loss(z: Tensor, labels, margin: float) -> Tensor:
    total, count = triplet_terms(z, labels, margin)
    if total is None:
        return Tensor(0.0, dtype=z.dtype)
    return total * (1.0 / count)


class TripletStatistics(BaseModel):
    n_valid: int
    n_non_easy: int
    fraction_non_easy: float
    mean_distance: float


def triplet_statistics(z: Union[Tensor, np.ndarray], labels, margin: float) -> TripletStatistics:
    data = z.data if isinstance(z, Tensor) else np.asarray(z, dtype=np.float64)
    labels = check_label_vector(labels, n=data.shape[0])
    n = data.shape[0]
    d = np.sqrt(((data[:, None, :] - data[None, :, :]) ** 2).sum(axis=-1))
    positive, negative = _positive_negative_masks(labels)
    n_valid = int(positive.sum(axis=1) @ negative.sum(axis=1))
    n_non_easy = int(mine_batch_all(d, labels, margin).shape[0])
    off_diag = d[~np.eye(n, dtype=bool)]
    return TripletStatistics(
        n_valid=n_valid,
        n_non_easy=n_non_easy,
        fraction_non_easy=n_non_easy / n_valid if n_valid else 0.0,
        mean_distance=float(off_diag.mean()) if off_diag.size else 0.0,
    )
