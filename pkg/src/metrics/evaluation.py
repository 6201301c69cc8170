# src/metrics/evaluation.py
from __future__ import annotations
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from config.settings import BOOTSTRAP_QUANTILES, BOOTSTRAP_RESAMPLES, settings
from src.metrics.contingency import PartitionLike, as_partition
from src.metrics.information import ami, homogeneity_completeness_v
from src.metrics.pairs import adjusted_rand_index, rand_index
from src.pdw.errors import PartitionError
from src.pdw.types import NOISE, Partition

logger = logging.getLogger(__name__)

PER_TRAIN_COLUMNS = ["train_id", "ami", "ari", "v", "h", "c", "n_true", "n_pred"]


class MetricReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    ami: float
    ari: float
    v_measure: float
    homogeneity: float
    completeness: float
    n_pred_clusters: int
    n_true_clusters: int
    rand_index: Optional[float] = None


class AggregateReport(BaseModel):
    """Arithmetic means over trains, plus cluster-count error."""

    n_trains: int
    ami: float
    ari: float
    v_measure: float
    homogeneity: float
    completeness: float
    mean_n_pred_clusters: float
    mean_n_true_clusters: float
    cluster_count_rmse: float


class DatasetEvaluation(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    aggregate: AggregateReport
    per_train: pd.DataFrame


def cluster_count(x: PartitionLike) -> int:
    """Blocks of a Partition; distinct non-NOISE ids of a label vector."""
    if isinstance(x, Partition):
        return len(x)
    arr = np.asarray(x)
    return int(np.unique(arr[arr != NOISE]).size)


def metric_report(pred: PartitionLike, truth: PartitionLike) -> MetricReport:
    """All extrinsic scores for one train; `pred` may carry NOISE labels."""
    pu, pv = as_partition(pred), as_partition(truth)
    h, c, v = homogeneity_completeness_v(pu, pv)
    return MetricReport(
        ami=ami(pu, pv),
        ari=adjusted_rand_index(pu, pv) if pu.n >= 2 else 1.0,
        v_measure=v,
        homogeneity=h,
        completeness=c,
        n_pred_clusters=cluster_count(pred),
        n_true_clusters=cluster_count(truth),
        rand_index=rand_index(pu, pv) if pu.n >= 2 else None,
    )


def _check_paired(preds: Sequence[Any], truths: Sequence[Any]) -> None:
    if len(preds) != len(truths):
        raise PartitionError(f"{len(preds)} predictions for {len(truths)} ground truths")


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values) if len(values) else float("nan")


def evaluate_dataset(
    preds: Sequence[PartitionLike],
    truths: Sequence[PartitionLike],
    train_ids: Optional[Sequence[str]] = None,
) -> DatasetEvaluation:
    """
    Per-train metrics (one row per train, input order) and their arithmetic means.
    Trains are scored on `settings.num_threads` workers; results are reduced in
    input order so the means never depend on the worker count.
    """
    _check_paired(preds, truths)
    if train_ids is None:
        train_ids = [str(i) for i in range(len(preds))]
    if len(train_ids) != len(preds):
        raise PartitionError(f"{len(train_ids)} train ids for {len(preds)} trains")

    workers = max(1, settings.num_threads)
    if workers == 1:
        reports = [metric_report(p, t) for p, t in zip(preds, truths)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(metric_report, preds, truths))

    per_train = pd.DataFrame(
        {
            "train_id": list(train_ids),
            "ami": [r.ami for r in reports],
            "ari": [r.ari for r in reports],
            "v": [r.v_measure for r in reports],
            "h": [r.homogeneity for r in reports],
            "c": [r.completeness for r in reports],
            "n_true": [r.n_true_clusters for r in reports],
            "n_pred": [r.n_pred_clusters for r in reports],
        },
        columns=PER_TRAIN_COLUMNS,
    )
    aggregate = AggregateReport(
        n_trains=len(reports),
        ami=_mean([r.ami for r in reports]),
        ari=_mean([r.ari for r in reports]),
        v_measure=_mean([r.v_measure for r in reports]),
        homogeneity=_mean([r.homogeneity for r in reports]),
        completeness=_mean([r.completeness for r in reports]),
        mean_n_pred_clusters=_mean([float(r.n_pred_clusters) for r in reports]),
        mean_n_true_clusters=_mean([float(r.n_true_clusters) for r in reports]),
        cluster_count_rmse=cluster_count_rms_error(preds, truths) if reports else float("nan"),
    )
    logger.info("evaluated %d trains: mean AMI %.4f", aggregate.n_trains, aggregate.ami)
    return DatasetEvaluation(aggregate=aggregate, per_train=per_train)


def cluster_counts(preds: Sequence[PartitionLike], truths: Sequence[PartitionLike]) -> Tuple[np.ndarray, np.ndarray]:
    _check_paired(preds, truths)
    return (
        np.array([cluster_count(p) for p in preds], dtype=np.int64),
        np.array([cluster_count(t) for t in truths], dtype=np.int64),
    )


def cluster_count_rms_error(preds: Sequence[PartitionLike], truths: Sequence[PartitionLike]) -> float:
    n_pred, n_true = cluster_counts(preds, truths)
    if n_pred.size == 0:
        raise PartitionError("cannot compute an RMS error over zero trains")
    return float(np.sqrt(np.mean((n_pred - n_true).astype(np.float64) ** 2)))


def confusion_matrix(preds: Sequence[PartitionLike], truths: Sequence[PartitionLike]) -> np.ndarray:
    """m[t, p] = number of trains with t true and p predicted clusters."""
    n_pred, n_true = cluster_counts(preds, truths)
    if n_pred.size == 0:
        return np.zeros((0, 0), dtype=np.int64)
    m = np.zeros((int(n_true.max()) + 1, int(n_pred.max()) + 1), dtype=np.int64)
    np.add.at(m, (n_true, n_pred), 1)
    return m


def bootstrap_ci(
    values: Sequence[float],
    lo: float = BOOTSTRAP_QUANTILES[0],
    hi: float = BOOTSTRAP_QUANTILES[1],
    n_resamples: int = BOOTSTRAP_RESAMPLES,
    seed: int = 0,
) -> Tuple[float, float]:
    """Percentile bootstrap of the mean."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ValueError("bootstrap_ci needs at least one value")
    if not (0.0 <= lo <= hi <= 1.0):
        raise ValueError(f"quantiles must satisfy 0 <= lo <= hi <= 1, got ({lo}, {hi})")
    if n_resamples < 1:
        raise ValueError("n_resamples must be >= 1")
    if np.ptp(x) == 0.0:
        return float(x[0]), float(x[0])
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, x.size, size=(n_resamples, x.size))
    means = x[idx].mean(axis=1)
    q_lo, q_hi = np.quantile(means, [lo, hi])
    return float(q_lo), float(q_hi)

