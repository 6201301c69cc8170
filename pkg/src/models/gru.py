# src/models/gru.py
'''
Stacked unidirectional GRU baseline. Pulses are read in ToA order; the hidden
state of the last layer at every step is projected to the embedding.

Each layer keeps fused input and hidden maps producing the reset, update and
candidate pre-activations side by side (3 * hidden columns):

  r = sigmoid(x_r + h_r)
  u = sigmoid(x_u + h_u)
  c = tanh(x_c + r * h_c)
  h' = c + u * (h - c)
'''
from __future__ import annotations
from typing import Dict, List, Optional

import numpy as np

from config.settings import N_FEATURES
from src.models.config import GruConfig
from src.models.embedder import Embedder, l2_normalize
from src.models.params import ParameterStore
from src.models.transformer import uniform_fan_in
from src.numerics.tensor import Tensor, concat


def init_gru_params(config: GruConfig, seed: int) -> ParameterStore:
    """All weights and biases ~ U(-1/sqrt(hidden), 1/sqrt(hidden)); output map uses its own fan-in."""
    rng = np.random.default_rng(seed)
    hs = config.hidden_size
    arrays: Dict[str, np.ndarray] = {}
    for i in range(config.n_layers):
        d_in = N_FEATURES if i == 0 else hs
        arrays[f"layers.{i}.x2h.weight"] = uniform_fan_in(rng, hs, (d_in, 3 * hs))
        arrays[f"layers.{i}.x2h.bias"] = uniform_fan_in(rng, hs, (3 * hs,))
        arrays[f"layers.{i}.h2h.weight"] = uniform_fan_in(rng, hs, (hs, 3 * hs))
        arrays[f"layers.{i}.h2h.bias"] = uniform_fan_in(rng, hs, (3 * hs,))
    arrays["output.weight"] = uniform_fan_in(rng, hs, (hs, config.d_embed))
    arrays["output.bias"] = uniform_fan_in(rng, hs, (config.d_embed,))
    return ParameterStore(arrays)


def gru_parameter_count(config: GruConfig) -> int:
    hs = config.hidden_size
    first = (N_FEATURES * 3 * hs + 3 * hs) + (hs * 3 * hs + 3 * hs)
    rest = 2 * (hs * 3 * hs + 3 * hs)
    return first + (config.n_layers - 1) * rest + hs * config.d_embed + config.d_embed


def gru_layer(params: ParameterStore, index: int, x: Tensor, hidden_size: int) -> Tensor:
    p = f"layers.{index}"
    hs = hidden_size
    gx = x @ params[f"{p}.x2h.weight"] + params[f"{p}.x2h.bias"]  # every step at once
    w_h, b_h = params[f"{p}.h2h.weight"], params[f"{p}.h2h.bias"]
    h = Tensor(np.zeros((1, hs)), dtype=x.dtype)
    steps: List[Tensor] = []
    for t in range(x.shape[0]):
        g = gx[t:t + 1]
        gh = h @ w_h + b_h
        r = (g[:, :hs] + gh[:, :hs]).sigmoid()
        u = (g[:, hs:2 * hs] + gh[:, hs:2 * hs]).sigmoid()
        c = (g[:, 2 * hs:] + r * gh[:, 2 * hs:]).tanh()
        h = c + u * (h - c)
        steps.append(h)
    return concat(steps, axis=0)


def gru_forward(
    config: GruConfig,
    params: ParameterStore,
    x: Tensor,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    h = x
    for i in range(config.n_layers):
        h = gru_layer(params, i, h, config.hidden_size)
    z = h @ params["output.weight"] + params["output.bias"]
    return l2_normalize(z) if config.normalize_embeddings else z


gru_model = Embedder(
    name="gru",
    description="Stacked GRU read in ToA order; order-dependent baseline.",
    config_cls=GruConfig,
    trainable=True,
    forward=gru_forward,
    init=init_gru_params,
)


def gru_embed(config: GruConfig, params: ParameterStore, train):
    return gru_model.embed(config, params, train)
