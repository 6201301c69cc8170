# src/pdw/types.py
from __future__ import annotations
from typing import Any, Iterable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config.settings import N_FEATURES
from src.pdw.errors import PartitionError

NOISE = -1

# Column indices into the (n, 5) feature matrix
TOA, FREQUENCY, PULSE_WIDTH, AOA, AMPLITUDE = range(N_FEATURES)

LabelVector = np.ndarray


class PulseDescriptorWord(BaseModel):
    """One pulse: seconds, hertz, seconds, degrees, dimensionless (dB)."""

    model_config = ConfigDict(frozen=True)

    toa: float = Field(ge=0.0)
    frequency: float = Field(gt=0.0)
    pulse_width: float = Field(gt=0.0)
    aoa: float = Field(ge=0.0, lt=360.0)
    amplitude: float

    def as_row(self) -> Tuple[float, float, float, float, float]:
        return (self.toa, self.frequency, self.pulse_width, self.aoa, self.amplitude)


def check_label_vector(labels: Any, n: Optional[int] = None, allow_noise: bool = False) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise PartitionError(f"label vector must be 1-D, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise PartitionError("label vector must contain integers")
    arr = arr.astype(np.int64)
    if n is not None and arr.shape[0] != n:
        raise PartitionError(f"label vector has {arr.shape[0]} entries for {n} pulses")
    floor = NOISE if allow_noise else 0
    if arr.size and arr.min() < floor:
        what = "NOISE (-1) or non-negative ids" if allow_noise else "non-negative ids"
        raise PartitionError(f"labels must be {what}, found {int(arr.min())}")
    return arr


class PulseTrain(BaseModel):
    """
    An ordered pulse collection. `features` is an (n, 5) matrix in PDW column order,
    sorted by ToA; `labels` holds ground-truth emitter ids when known.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    train_id: str
    features: np.ndarray
    labels: Optional[np.ndarray] = None

    @field_validator("features", mode="before")
    @classmethod
    def _coerce_features(cls, v):
        arr = np.array(v, dtype=np.float64)
        if arr.size == 0:
            arr = arr.reshape(0, N_FEATURES)
        if arr.ndim != 2 or arr.shape[1] != N_FEATURES:
            raise ValueError(f"features must have shape (n, {N_FEATURES}), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("features contain non-finite values")
        arr.setflags(write=False)
        return arr

    @field_validator("labels", mode="before")
    @classmethod
    def _coerce_labels(cls, v):
        if v is None:
            return None
        arr = check_label_vector(v)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check_invariants(self):
        f = self.features
        if f.shape[0]:
            if np.any(np.diff(f[:, TOA]) < 0):
                raise ValueError(f"train {self.train_id}: pulses are not sorted by ToA")
            if f[:, TOA].min() < 0:
                raise ValueError(f"train {self.train_id}: negative ToA")
            if np.any(f[:, FREQUENCY] <= 0) or np.any(f[:, PULSE_WIDTH] <= 0):
                raise ValueError(f"train {self.train_id}: frequency and pulse width must be positive")
            if np.any(f[:, AOA] < 0) or np.any(f[:, AOA] >= 360.0):
                raise ValueError(f"train {self.train_id}: AoA outside [0, 360)")
        if self.labels is not None and self.labels.shape[0] != f.shape[0]:
            raise ValueError(
                f"train {self.train_id}: {self.labels.shape[0]} labels for {f.shape[0]} pulses"
            )
        return self

    @classmethod
    def from_unsorted(cls, train_id: str, features: Any, labels: Any = None) -> "PulseTrain":
        """Stable-sort by ToA, permuting labels consistently."""
        arr = np.asarray(features, dtype=np.float64)
        if arr.ndim == 2 and arr.shape[0] > 1:
            order = np.argsort(arr[:, TOA], kind="stable")
            arr = arr[order]
            if labels is not None:
                labels = np.asarray(labels)[order]
        return cls(train_id=train_id, features=arr, labels=labels)

    @classmethod
    def from_pdws(
        cls, pdws: Iterable[PulseDescriptorWord], labels: Any = None, train_id: str = "train"
    ) -> "PulseTrain":
        rows = [p.as_row() for p in pdws]
        return cls.from_unsorted(train_id, np.array(rows, dtype=np.float64).reshape(-1, N_FEATURES), labels)

    def pdws(self) -> List[PulseDescriptorWord]:
        return [
            PulseDescriptorWord(toa=r[0], frequency=r[1], pulse_width=r[2], aoa=r[3], amplitude=r[4])
            for r in self.features.tolist()
        ]

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_emitters(self) -> int:
        if self.labels is None:
            raise ValueError(f"train {self.train_id} has no labels")
        return int(np.unique(self.labels).size)


class NormalizedTrain(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    train_id: str
    features: np.ndarray

    def __len__(self) -> int:
        return int(self.features.shape[0])


class Partition(BaseModel):
    """
    A clustering of {0, ..., n-1}. Blocks are stored canonically: each block sorted,
    blocks ordered by their smallest member.
    """

    model_config = ConfigDict(frozen=True)

    blocks: Tuple[Tuple[int, ...], ...]

    @field_validator("blocks", mode="before")
    @classmethod
    def _canonical(cls, v):
        blocks = [tuple(sorted(int(i) for i in b)) for b in v]
        if any(len(b) == 0 for b in blocks):
            raise PartitionError("partition contains an empty block")
        members = [i for b in blocks for i in b]
        if len(members) != len(set(members)):
            raise PartitionError("partition blocks overlap")
        if members and (min(members) != 0 or max(members) != len(members) - 1):
            raise PartitionError(
                f"partition blocks do not cover 0..{len(members) - 1} exactly"
            )
        return tuple(sorted(blocks, key=lambda b: b[0]))

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def sizes(self) -> np.ndarray:
        return np.array([len(b) for b in self.blocks], dtype=np.int64)
