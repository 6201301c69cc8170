# src/models/identity.py
from __future__ import annotations
from typing import Optional

import numpy as np

from src.models.config import IdentityConfig
from src.models.embedder import Embedder
from src.numerics.tensor import Tensor


def identity_forward(
    config: IdentityConfig,
    params: None,
    x: Tensor,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    return x


identity_model = Embedder(
    name="identity",
    description="Clusters the normalized PDWs directly; no parameters.",
    config_cls=IdentityConfig,
    trainable=False,
    forward=identity_forward,
)


def identity_embed(train):
    return identity_model.embed(IdentityConfig(), None, train)
