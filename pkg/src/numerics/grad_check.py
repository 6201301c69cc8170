# src/numerics/grad_check.py
from __future__ import annotations
from typing import Callable, List, Sequence

import numpy as np

from src.numerics.tensor import Tensor, no_grad
from src.pdw.errors import ShapeError

# relative errors are measured against max(|analytic|, |numeric|, this floor)
_ERROR_FLOOR = 1e-3


def _scalar(out: Tensor) -> float:
    if out.size != 1:
        raise ShapeError("grad_check (function must return a scalar)", out.shape)
    return float(out.data.reshape(-1)[0])


def analytic_gradients(f: Callable[..., Tensor], inputs: Sequence[Tensor]) -> List[np.ndarray]:
    for x in inputs:
        x.zero_grad()
    out = f(*inputs)
    _scalar(out)
    if out.requires_grad:
        out.backward()
    return [np.zeros_like(x.data) if x.grad is None else np.array(x.grad) for x in inputs]


def numeric_gradients(f: Callable[..., Tensor], inputs: Sequence[Tensor], step: float = 1e-6) -> List[np.ndarray]:
    """Central differences with a step of `step * max(1, |x|)` per element."""
    grads = []
    with no_grad():
        for x in inputs:
            g = np.zeros_like(x.data)
            flat = x.data.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                h = step * max(1.0, abs(float(orig)))
                flat[i] = orig + h
                f_plus = _scalar(f(*inputs))
                flat[i] = orig - h
                f_minus = _scalar(f(*inputs))
                flat[i] = orig
                g.reshape(-1)[i] = (f_plus - f_minus) / (2.0 * h)
            grads.append(g)
    return grads


def grad_check(f: Callable[..., Tensor], inputs: Sequence[Tensor], step: float = 1e-6) -> float:
    """
    Max element-wise relative error between reverse-mode and central-difference
    gradients of the scalar function `f` at `inputs`. Inputs are perturbed in
    place and restored; use 64-bit tensors.
    """
    for x in inputs:
        if x.data.dtype != np.float64 or not (x.data.flags.writeable and x.data.flags.c_contiguous):
            raise ValueError("grad_check needs writeable, contiguous float64 inputs")
    analytic = analytic_gradients(f, inputs)
    numeric = numeric_gradients(f, inputs, step)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        if a.size == 0:
            continue
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), _ERROR_FLOOR)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
