# src/pdw/normalize.py
from __future__ import annotations

import numpy as np

from src.pdw.types import AMPLITUDE, AOA, FREQUENCY, PULSE_WIDTH, TOA, NormalizedTrain, PulseTrain

ZSCORE_COLUMNS = (FREQUENCY, PULSE_WIDTH, AMPLITUDE)


def zscore_column(col: np.ndarray) -> np.ndarray:
    # the mean of a constant column can be off by one ulp, so test the spread directly
    if np.ptp(col) == 0.0:
        return np.zeros_like(col)
    centred = col - col.mean()
    std = centred.std()
    if std == 0.0:
        return np.zeros_like(col)
    return centred / std


def normalize_train(train: PulseTrain) -> NormalizedTrain:
    """
    Per-train normalization:
      - ToA min-max scaled to [0, 1] (single pulse or constant ToA -> 0)
      - frequency, pulse width, amplitude z-scored within the train
      - AoA divided by 360
    """
    x = np.asarray(train.features, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError(f"train {train.train_id}: cannot normalize an empty train")
    out = np.empty_like(x)

    toa = x[:, TOA]
    span = toa.max() - toa.min()
    out[:, TOA] = (toa - toa.min()) / span if span > 0 else 0.0

    for c in ZSCORE_COLUMNS:
        out[:, c] = zscore_column(x[:, c])

    out[:, AOA] = x[:, AOA] / 360.0
    return NormalizedTrain(train_id=train.train_id, features=out)
