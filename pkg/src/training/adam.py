# src/training/adam.py
from __future__ import annotations
from typing import Dict, Mapping

import numpy as np

from src.models.params import ParameterStore
from src.pdw.errors import CheckpointError, ShapeError


class Adam:
    """Bias-corrected Adam over named numpy arrays, updated in place."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
        for k, p in params.items():
            if k not in grads:
                raise KeyError(f"no gradient for parameter {k}")
            if grads[k].shape != p.shape:
                raise ShapeError(f"adam_step[{k}]", p.shape, grads[k].shape)

        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        step_size = self.lr / bc1

        for k, p in params.items():
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(p)
                self.v[k] = np.zeros_like(p)
            self.m[k] *= self.beta1
            self.m[k] += (1.0 - self.beta1) * g
            self.v[k] *= self.beta2
            self.v[k] += (1.0 - self.beta2) * (g * g)
            denom = np.sqrt(self.v[k] * (1.0 / bc2)) + self.epsilon
            p -= (step_size * self.m[k] / denom).astype(p.dtype, copy=False)

    def step_store(self, store: ParameterStore) -> None:
        self.step({k: t.data for k, t in store.items()}, store.grads())

    # --- checkpoint state ---
    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {"step": np.array(self.t, dtype=np.int64)}
        for k in self.m:
            state[f"m.{k}"] = self.m[k]
            state[f"v.{k}"] = self.v[k]
        return state

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        if "step" not in state:
            raise CheckpointError("optimizer state has no step counter")
        self.t = int(np.asarray(state["step"]))
        self.m, self.v = {}, {}
        for key, arr in state.items():
            if key.startswith("m."):
                self.m[key[2:]] = np.array(arr, copy=True)
            elif key.startswith("v."):
                self.v[key[2:]] = np.array(arr, copy=True)
        if set(self.m) != set(self.v):
            raise CheckpointError("optimizer state has unpaired moment arrays")


def adam_step(
    params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray], state: Adam
) -> Adam:
    """Functional form: updates `params` in place and returns the advanced state."""
    state.step(params, grads)
    return state
