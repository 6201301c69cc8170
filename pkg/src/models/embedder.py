# src/models/embedder.py
from __future__ import annotations
from typing import Any, Callable, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from config.settings import DISTANCE_EPS, N_FEATURES
from src.numerics.tensor import Tensor, no_grad
from src.models.params import ParameterStore
from src.pdw.errors import NonFiniteError, ShapeError
from src.pdw.types import NormalizedTrain

# forward(config, params, x, train_mode, rng) -> (n, d_embed) tensor
ForwardFn = Callable[[Any, Optional[ParameterStore], Tensor, bool, Optional[np.random.Generator]], Tensor]
InitFn = Callable[[Any, int], ParameterStore]


class EmbeddingSet(BaseModel):
    """Row i embeds pulse i of the train."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    train_id: str
    embeddings: np.ndarray

    @field_validator("embeddings", mode="before")
    @classmethod
    def _check(cls, v):
        arr = np.asarray(v)
        if arr.ndim != 2:
            raise ValueError(f"embeddings must be a 2-D matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("embeddings contain non-finite values")
        return arr

    def __len__(self) -> int:
        return int(self.embeddings.shape[0])

    @property
    def d_embed(self) -> int:
        return int(self.embeddings.shape[1])


def input_matrix(train: Union[NormalizedTrain, np.ndarray]) -> np.ndarray:
    x = np.asarray(train.features if isinstance(train, NormalizedTrain) else train, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != N_FEATURES:
        raise ShapeError("embed (expected n x 5 normalized features)", x.shape)
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("normalized train contains non-finite values")
    return x


def l2_normalize(z: Tensor) -> Tensor:
    return z / ((z * z).sum(axis=-1, keepdims=True) + DISTANCE_EPS).sqrt()


class Embedder(BaseModel):
    """A registered model: how to initialise it and how to run it forward."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str
    description: str
    config_cls: type
    trainable: bool
    forward: ForwardFn
    init: Optional[InitFn] = None

    def init_params(self, config: Any, seed: int) -> Optional[ParameterStore]:
        if self.init is None:
            return None
        return self.init(config, seed)

    def forward_train(
        self,
        config: Any,
        params: Optional[ParameterStore],
        train: Union[NormalizedTrain, np.ndarray],
        train_mode: bool = True,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        """Forward pass that records the tape; used by the trainer."""
        x = input_matrix(train)
        dtype = params.dtype if params is not None else np.float64
        return self.forward(config, params, Tensor(x, dtype=dtype), train_mode, rng)

    def embed(
        self, config: Any, params: Optional[ParameterStore], train: Union[NormalizedTrain, np.ndarray]
    ) -> EmbeddingSet:
        """Eval-mode embedding (dropout off, no tape)."""
        x = input_matrix(train)
        train_id = train.train_id if isinstance(train, NormalizedTrain) else "train"
        if x.shape[0] == 0:
            return EmbeddingSet(train_id=train_id, embeddings=np.zeros((0, config.d_embed)))
        dtype = params.dtype if params is not None else np.float64
        with no_grad():
            z = self.forward(config, params, Tensor(x, dtype=dtype), False, None)
        return EmbeddingSet(train_id=train_id, embeddings=z.data)
