# src/models/config.py
from __future__ import annotations
from enum import Enum
from typing import Annotated, Any, Dict, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, field_validator, model_validator

from config.settings import DESK_GRU, DESK_TRANSFORMER, N_FEATURES, FULL_GRU, FULL_TRANSFORMER
from src.pdw.errors import ConfigError


class NormPlacement(str, Enum):
    pre = "pre"
    post = "post"


class TransformerConfig(BaseModel):
    """
    Encoder-only transformer over the pulses of one train. Every pulse attends to
    every other pulse; there are no positional encodings, so the model is
    equivariant to reordering the pulses.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["transformer"] = "transformer"
    n_layers: int = Field(default=DESK_TRANSFORMER["n_layers"], ge=1)
    n_heads: int = Field(default=DESK_TRANSFORMER["n_heads"], ge=1)
    d_model: int = Field(default=DESK_TRANSFORMER["d_model"], ge=1)
    d_ff: int = Field(default=DESK_TRANSFORMER["d_ff"], ge=1)
    d_embed: int = Field(default=DESK_TRANSFORMER["d_embed"], ge=1)
    dropout: float = Field(default=DESK_TRANSFORMER["dropout"], ge=0.0, lt=1.0)
    norm_placement: NormPlacement = NormPlacement.pre
    normalize_embeddings: bool = False
    positional_encoding: bool = False
    attention_mask: Literal["none"] = "none"
    input_projection: Literal["linear"] = "linear"

    @field_validator("positional_encoding")
    @classmethod
    def _no_positions(cls, v: bool) -> bool:
        if v:
            raise ValueError("positional encodings are not supported: pulse order is carried by the ToA feature")
        return v

    @model_validator(mode="after")
    def _check_heads(self):
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})")
        return self

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads


class GruConfig(BaseModel):
    """Stacked unidirectional GRU read in ToA order, projected per step to d_embed."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["gru"] = "gru"
    n_layers: int = Field(default=DESK_GRU["n_layers"], ge=1)
    hidden_size: int = Field(default=DESK_GRU["hidden_size"], ge=1)
    d_embed: int = Field(default=DESK_GRU["d_embed"], ge=1)
    normalize_embeddings: bool = False


class IdentityConfig(BaseModel):
    """The normalized PDWs themselves are the embeddings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["identity"] = "identity"

    @property
    def d_embed(self) -> int:
        return N_FEATURES


ModelConfig = Annotated[Union[TransformerConfig, GruConfig, IdentityConfig], Field(discriminator="kind")]
_adapter: TypeAdapter = TypeAdapter(ModelConfig)

MODEL_KINDS = ("transformer", "gru", "identity")


def model_config_from_dict(doc: Dict[str, Any]) -> Union[TransformerConfig, GruConfig, IdentityConfig]:
    doc = dict(doc or {})
    if doc.get("kind") not in MODEL_KINDS:
        raise ConfigError(f"model kind must be one of {list(MODEL_KINDS)}, got {doc.get('kind')!r}")
    try:
        return _adapter.validate_python(doc)
    except ValidationError as e:
        raise ConfigError(f"invalid {doc['kind']} config: {e}") from e


def desk_config(kind: str) -> Union[TransformerConfig, GruConfig, IdentityConfig]:
    return model_config_from_dict({"kind": kind})


def full_config(kind: str) -> Union[TransformerConfig, GruConfig, IdentityConfig]:
    """Full-size hyperparameters. The GRU width is chosen so both models carry roughly equal parameter counts."""
    overrides = {"transformer": FULL_TRANSFORMER, "gru": FULL_GRU}.get(kind, {})
    return model_config_from_dict({"kind": kind, **overrides})
