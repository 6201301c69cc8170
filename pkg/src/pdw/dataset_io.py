# src/pdw/dataset_io.py
from __future__ import annotations
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Union

import numpy as np
import orjson
from pydantic import ValidationError

from config.settings import N_FEATURES
from src.pdw.errors import DatasetFormatError
from src.pdw.types import PulseTrain

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _record(train: PulseTrain) -> Dict[str, Any]:
    rec: Dict[str, Any] = {"train_id": train.train_id, "pulses": train.features.tolist()}
    if train.labels is not None:
        rec["labels"] = train.labels.tolist()
    return rec


def write_dataset(trains: Iterable[PulseTrain], path: PathLike) -> int:
    """One JSON object per line; floats written with full round-trip precision."""
    out_path = Path(path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    try:
        with out_path.open("wb") as fh:
            for train in trains:
                fh.write(orjson.dumps(_record(train)))
                fh.write(b"\n")
                count += 1
    except OSError as e:
        raise OSError(f"failed writing dataset {out_path}: {e}") from e
    logger.debug("wrote %d trains to %s", count, out_path)
    return count


def parse_record(line: Union[bytes, str], path: str = "<memory>", lineno: int = 1) -> PulseTrain:
    try:
        rec = orjson.loads(line)
    except orjson.JSONDecodeError as e:
        raise DatasetFormatError(f"invalid JSON ({e})", path, lineno) from e
    if not isinstance(rec, dict):
        raise DatasetFormatError("record is not a JSON object", path, lineno)
    if "train_id" not in rec or "pulses" not in rec:
        raise DatasetFormatError("record needs 'train_id' and 'pulses'", path, lineno)
    pulses = rec["pulses"]
    if not isinstance(pulses, list):
        raise DatasetFormatError("'pulses' must be a list", path, lineno)
    for k, row in enumerate(pulses):
        if not isinstance(row, list) or len(row) != N_FEATURES:
            width = len(row) if isinstance(row, list) else type(row).__name__
            raise DatasetFormatError(
                f"pulse {k} has {width} fields, expected {N_FEATURES}", path, lineno
            )
    labels = rec.get("labels")
    if labels is not None:
        if not isinstance(labels, list):
            raise DatasetFormatError(f"'labels' must be a list, got {type(labels).__name__}", path, lineno)
        if len(labels) != len(pulses):
            raise DatasetFormatError(f"{len(labels)} labels for {len(pulses)} pulses", path, lineno)
    try:
        features = np.array(pulses, dtype=np.float64).reshape(-1, N_FEATURES)
    except (TypeError, ValueError) as e:
        raise DatasetFormatError(f"non-numeric pulse field ({e})", path, lineno) from e
    try:
        return PulseTrain.from_unsorted(str(rec["train_id"]), features, labels)
    except (ValidationError, ValueError) as e:
        raise DatasetFormatError(str(e), path, lineno) from e


def read_dataset(path: PathLike) -> Iterator[PulseTrain]:
    """Stream trains from a line-delimited dataset file, re-sorting by ToA if needed."""
    in_path = Path(path)
    if not in_path.exists():
        raise FileNotFoundError(f"dataset not found: {in_path}")
    with in_path.open("rb") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            yield parse_record(line, str(in_path), lineno)


def load_dataset(path: PathLike) -> List[PulseTrain]:
    return list(read_dataset(path))


def train_summary(train: PulseTrain) -> Dict[str, Any]:
    out: Dict[str, Any] = {"train_id": train.train_id, "n_pulses": len(train)}
    if train.labels is not None:
        _, sizes = np.unique(train.labels, return_counts=True)
        out["n_emitters"] = int(sizes.size)
        out["cluster_sizes"] = sorted(sizes.tolist(), reverse=True)
    return out
