# src/metrics/reports.py
from __future__ import annotations
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import duckdb
import numpy as np
import orjson
import pandas as pd

from config.settings import BOOTSTRAP_QUANTILES, BOOTSTRAP_RESAMPLES, CLUSTER_SIZE_BINS
from src.metrics.contingency import PartitionLike, as_partition
from src.metrics.evaluation import DatasetEvaluation, bootstrap_ci, cluster_counts

logger = logging.getLogger(__name__)

REPORT_FILES = {
    "aggregate": "aggregate.json",
    "per_train": "per_train.csv",
    "confusion": "confusion_matrix.csv",
    "per_emitter_count": "per_emitter_count_ami.csv",
    "cluster_sizes": "cluster_size_distribution.csv",
}

# --- DuckDB connection cache ---
_duck_con: duckdb.DuckDBPyConnection | None = None
def _con() -> duckdb.DuckDBPyConnection:
    global _duck_con
    if _duck_con is None:
        _duck_con = duckdb.connect(database=":memory:")
    return _duck_con


def _query(sql: str, **frames: pd.DataFrame) -> pd.DataFrame:
    con = _con()
    for name, df in frames.items():
        con.register(name, df)
    try:
        return con.execute(sql).fetchdf()
    finally:
        for name in frames:
            con.unregister(name)


# --- Cluster-count confusion ---
def confusion_long_form(preds: Sequence[PartitionLike], truths: Sequence[PartitionLike]) -> pd.DataFrame:
    """(n_true, n_pred, count) rows, only non-zero cells, sorted."""
    n_pred, n_true = cluster_counts(preds, truths)
    pairs = pd.DataFrame({"n_true": n_true, "n_pred": n_pred})
    out = _query(
        "SELECT n_true, n_pred, COUNT(*) AS count FROM pairs "
        "GROUP BY n_true, n_pred ORDER BY n_true, n_pred",
        pairs=pairs,
    )
    return out.astype({"n_true": "int64", "n_pred": "int64", "count": "int64"})


# --- AMI by true emitter count ---
def per_emitter_count_ami(
    per_train: pd.DataFrame,
    lo: float = BOOTSTRAP_QUANTILES[0],
    hi: float = BOOTSTRAP_QUANTILES[1],
    n_resamples: int = BOOTSTRAP_RESAMPLES,
    seed: int = 0,
) -> pd.DataFrame:
    """
    Mean AMI per true emitter count with a percentile-bootstrap interval [lo, hi],
    plus mean homogeneity and completeness.
    """
    grouped = _query(
        "SELECT n_true, COUNT(*) AS n_trains, AVG(ami) AS mean, AVG(h) AS mean_h, AVG(c) AS mean_c, "
        "LIST(ami ORDER BY train_id) AS amis "
        "FROM per_train GROUP BY n_true ORDER BY n_true",
        per_train=per_train[["train_id", "n_true", "ami", "h", "c"]],
    )
    rows: List[Dict[str, float]] = []
    for rec in grouped.to_dict(orient="records"):
        ci_lo, ci_hi = bootstrap_ci(list(rec["amis"]), lo=lo, hi=hi, n_resamples=n_resamples, seed=seed)
        rows.append(
            {
                "n_true": int(rec["n_true"]),
                "n_trains": int(rec["n_trains"]),
                "lo": ci_lo,
                "mean": float(rec["mean"]),
                "hi": ci_hi,
                "mean_h": float(rec["mean_h"]),
                "mean_c": float(rec["mean_c"]),
            }
        )
    return pd.DataFrame(rows, columns=["n_true", "n_trains", "lo", "mean", "hi", "mean_h", "mean_c"])


# --- True cluster sizes ---
def cluster_size_table(truths: Sequence[PartitionLike], train_ids: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """One row per true cluster: train_id, n_true, size."""
    if train_ids is None:
        train_ids = [str(i) for i in range(len(truths))]
    rows = []
    for tid, truth in zip(train_ids, truths):
        sizes = as_partition(truth).sizes()
        rows.extend((tid, int(sizes.size), int(s)) for s in sizes.tolist())
    return pd.DataFrame(rows, columns=["train_id", "n_true", "cluster_size"])


def cluster_size_distribution(
    truths: Sequence[PartitionLike],
    bins: Sequence[int] = CLUSTER_SIZE_BINS,
) -> pd.DataFrame:
    """
    For every true emitter count: mean, p10 and p90 of the true cluster sizes, and
    the proportion of clusters whose size falls in each [bin_lo, bin_hi) bin. The
    last bin is open-ended (bin_hi is null).
    """
    sizes = cluster_size_table(truths)
    edges = np.asarray(bins, dtype=np.int64)
    idx = np.clip(np.searchsorted(edges, sizes["cluster_size"].to_numpy(), side="right") - 1, 0, edges.size - 1)
    sizes["bin_lo"] = edges[idx]
    sizes["bin_hi"] = pd.array([int(edges[i + 1]) if i + 1 < edges.size else None for i in idx], dtype="Int64")
    out = _query(
        """
        WITH summary AS (
            SELECT n_true, COUNT(*) AS n_clusters, AVG(cluster_size) AS mean_size,
                   quantile_cont(cluster_size, 0.1) AS p10, quantile_cont(cluster_size, 0.9) AS p90
            FROM sizes GROUP BY n_true
        ),
        binned AS (
            SELECT n_true, bin_lo, bin_hi, COUNT(*) AS n_in_bin
            FROM sizes GROUP BY n_true, bin_lo, bin_hi
        )
        SELECT b.n_true, s.n_clusters, s.mean_size, s.p10, s.p90, b.bin_lo, b.bin_hi,
               b.n_in_bin::DOUBLE / s.n_clusters AS proportion
        FROM binned b JOIN summary s USING (n_true)
        ORDER BY b.n_true, b.bin_lo
        """,
        sizes=sizes,
    )
    return out


# --- Per-pulse predictions ---
def predictions_table(
    preds: Sequence[np.ndarray],
    truths: Sequence[np.ndarray],
    train_ids: Sequence[str],
) -> pd.DataFrame:
    """One row per pulse, in ToA order within each train: train_id, pulse, true_label, pred_label."""
    frames = []
    for tid, pred, truth in zip(train_ids, preds, truths):
        p, t = np.asarray(pred, dtype=np.int64), np.asarray(truth, dtype=np.int64)
        frames.append(pd.DataFrame({"train_id": tid, "pulse": np.arange(p.size), "true_label": t, "pred_label": p}))
    if not frames:
        return pd.DataFrame(columns=["train_id", "pulse", "true_label", "pred_label"])
    return pd.concat(frames, ignore_index=True)


def write_predictions(table: pd.DataFrame, path: Union[str, Path]) -> Path:
    out = Path(path)
    target = out.as_posix().replace("'", "''")
    con = _con()
    con.register("predictions", table)
    try:
        con.execute(f"COPY (SELECT * FROM predictions ORDER BY train_id, pulse) TO '{target}' (FORMAT PARQUET)")
    finally:
        con.unregister("predictions")
    print(f"wrote {out}")
    return out


def _write_csv(df: pd.DataFrame, path: Path) -> Path:
    try:
        df.to_csv(path, index=False)
    except OSError as e:
        raise OSError(f"failed writing {path}: {e}") from e
    print(f"wrote {path}")
    return path


def write_reports(
    evaluation: DatasetEvaluation,
    preds: Sequence[PartitionLike],
    truths: Sequence[PartitionLike],
    out_dir: Union[str, Path],
    seed: int = 0,
    n_resamples: int = BOOTSTRAP_RESAMPLES,
) -> Dict[str, Path]:
    """Every evaluation artifact under `out_dir`; returns {kind: path}."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / v for k, v in REPORT_FILES.items()}

    paths["aggregate"].write_bytes(
        orjson.dumps(evaluation.aggregate.model_dump(), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)
    )
    print(f"wrote {paths['aggregate']}")
    _write_csv(evaluation.per_train, paths["per_train"])
    _write_csv(confusion_long_form(preds, truths), paths["confusion"])
    _write_csv(
        per_emitter_count_ami(evaluation.per_train, n_resamples=n_resamples, seed=seed),
        paths["per_emitter_count"],
    )
    _write_csv(cluster_size_distribution(truths), paths["cluster_sizes"])
    logger.info("reports written to %s", out)
    return paths
