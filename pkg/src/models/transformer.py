# src/models/transformer.py
'''
Sequence-to-sequence transformer encoder over one pulse train.

  x (n, 5) -> linear -> [attention block, feed-forward block] x n_layers -> linear -> z (n, d_embed)

Attention is unmasked dot-product self-attention and there are no positional
encodings, so permuting the input rows permutes the output rows identically.
'''
from __future__ import annotations
import math
from typing import Dict, Optional

import numpy as np

from config.settings import N_FEATURES
from src.models.config import NormPlacement, TransformerConfig
from src.models.embedder import Embedder, l2_normalize
from src.models.params import ParameterStore
from src.numerics.tensor import Tensor, dropout, layer_norm, softmax


def uniform_fan_in(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _linear(arrays: Dict[str, np.ndarray], rng: np.random.Generator, name: str, d_in: int, d_out: int) -> None:
    arrays[f"{name}.weight"] = uniform_fan_in(rng, d_in, (d_in, d_out))
    arrays[f"{name}.bias"] = uniform_fan_in(rng, d_in, (d_out,))


def _norm(arrays: Dict[str, np.ndarray], name: str, d: int) -> None:
    arrays[f"{name}.weight"] = np.ones(d)
    arrays[f"{name}.bias"] = np.zeros(d)


def init_transformer_params(config: TransformerConfig, seed: int) -> ParameterStore:
    """
    Linear maps (stored d_in x d_out) and their biases draw from
    U(-1/sqrt(d_in), 1/sqrt(d_in)); layer norms start at weight 1, bias 0.
    """
    rng = np.random.default_rng(seed)
    d, f = config.d_model, config.d_ff
    arrays: Dict[str, np.ndarray] = {}
    _linear(arrays, rng, "input", N_FEATURES, d)
    for i in range(config.n_layers):
        p = f"layers.{i}"
        for proj in ("q", "k", "v", "o"):
            _linear(arrays, rng, f"{p}.attn.{proj}", d, d)
        _norm(arrays, f"{p}.norm1", d)
        _linear(arrays, rng, f"{p}.ffn.up", d, f)
        _linear(arrays, rng, f"{p}.ffn.down", f, d)
        _norm(arrays, f"{p}.norm2", d)
    if config.norm_placement == NormPlacement.pre:
        _norm(arrays, "final_norm", d)
    _linear(arrays, rng, "output", d, config.d_embed)
    return ParameterStore(arrays)


def transformer_parameter_count(config: TransformerConfig) -> int:
    d, f = config.d_model, config.d_ff
    per_layer = 4 * (d * d + d) + (d * f + f) + (f * d + d) + 2 * (2 * d)
    final = 2 * d if config.norm_placement == NormPlacement.pre else 0
    return (N_FEATURES * d + d) + config.n_layers * per_layer + final + (d * config.d_embed + config.d_embed)


def _apply_linear(params: ParameterStore, name: str, x: Tensor) -> Tensor:
    return x @ params[f"{name}.weight"] + params[f"{name}.bias"]


def _apply_norm(params: ParameterStore, name: str, x: Tensor) -> Tensor:
    return layer_norm(x, params[f"{name}.weight"], params[f"{name}.bias"])


def self_attention(
    config: TransformerConfig,
    params: ParameterStore,
    prefix: str,
    h: Tensor,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    n = h.shape[0]
    heads, dh = config.n_heads, config.head_dim

    def split(t: Tensor) -> Tensor:
        return t.reshape(n, heads, dh).swapaxes(0, 1)  # (heads, n, dh)

    q = split(_apply_linear(params, f"{prefix}.q", h))
    k = split(_apply_linear(params, f"{prefix}.k", h))
    v = split(_apply_linear(params, f"{prefix}.v", h))
    scores = (q @ k.swapaxes(-1, -2)) * (1.0 / math.sqrt(dh))
    weights = dropout(softmax(scores, axis=-1), config.dropout, train_mode, rng)
    mixed = (weights @ v).swapaxes(0, 1).reshape(n, config.d_model)
    return _apply_linear(params, f"{prefix}.o", mixed)


def feed_forward(params: ParameterStore, prefix: str, h: Tensor) -> Tensor:
    return _apply_linear(params, f"{prefix}.down", _apply_linear(params, f"{prefix}.up", h).relu())


def encoder_layer(
    config: TransformerConfig,
    params: ParameterStore,
    index: int,
    h: Tensor,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    p = f"layers.{index}"
    p_drop = config.dropout
    if config.norm_placement == NormPlacement.pre:
        h = h + dropout(self_attention(config, params, f"{p}.attn", _apply_norm(params, f"{p}.norm1", h), train_mode, rng), p_drop, train_mode, rng)
        h = h + dropout(feed_forward(params, f"{p}.ffn", _apply_norm(params, f"{p}.norm2", h)), p_drop, train_mode, rng)
        return h
    h = _apply_norm(params, f"{p}.norm1", h + dropout(self_attention(config, params, f"{p}.attn", h, train_mode, rng), p_drop, train_mode, rng))
    return _apply_norm(params, f"{p}.norm2", h + dropout(feed_forward(params, f"{p}.ffn", h), p_drop, train_mode, rng))


def transformer_forward(
    config: TransformerConfig,
    params: ParameterStore,
    x: Tensor,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    h = _apply_linear(params, "input", x)
    for i in range(config.n_layers):
        h = encoder_layer(config, params, i, h, train_mode, rng)
    if config.norm_placement == NormPlacement.pre:
        h = _apply_norm(params, "final_norm", h)
    z = _apply_linear(params, "output", h)
    return l2_normalize(z) if config.normalize_embeddings else z


transformer_model = Embedder(
    name="transformer",
    description="Transformer encoder; every pulse attends to the whole train.",
    config_cls=TransformerConfig,
    trainable=True,
    forward=transformer_forward,
    init=init_transformer_params,
)


def transformer_embed(config: TransformerConfig, params: ParameterStore, train):
    return transformer_model.embed(config, params, train)
