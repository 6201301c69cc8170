# src/numerics/tensor.py
'''
Reverse-mode automatic differentiation over numpy arrays.

Every op builds a new Tensor whose `_backward` closure pushes the upstream
gradient into its parents. `Tensor.backward()` walks the tape in reverse
topological order, visiting each node once.
'''
from __future__ import annotations
import threading
from contextlib import contextmanager
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import DISTANCE_EPS, LAYER_NORM_EPS, settings
from src.pdw.errors import NonFiniteError, ShapeError

ArrayLike = Union[np.ndarray, float, int, Sequence]

_default_dtype = np.float32
_state = threading.local()


def set_default_dtype(dtype) -> None:
    global _default_dtype
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"default dtype must be float32 or float64, got {dt}")
    _default_dtype = dt.type


def get_default_dtype():
    return _default_dtype


@contextmanager
def default_dtype(dtype) -> Iterator[None]:
    prev = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(prev)


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Ops inside the block record nothing on the tape (per thread)."""
    prev = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_check(op: str, a: "Tensor", b: "Tensor") -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


class Tensor:
    def __init__(self, data: ArrayLike, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=_default_dtype if dtype is None else dtype)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self._op = "leaf"

    # --- construction helpers ---
    @classmethod
    def _result(cls, data: np.ndarray, parents: Tuple["Tensor", ...], op: str) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out._op = op
        out._backward = None
        out.requires_grad = is_grad_enabled() and any(p.requires_grad for p in parents)
        out._parents = parents if out.requires_grad else ()
        if settings.debug and not np.all(np.isfinite(data)):
            raise NonFiniteError(f"{op} produced non-finite values (shape {data.shape})")
        return out

    def _lift(self, other: Union["Tensor", ArrayLike]) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype), dtype=self.data.dtype)

    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad = self.grad + g

    # --- introspection ---
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self):
        return self.data.dtype

    def __len__(self) -> int:
        return self.data.shape[0]

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self._op}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError("item", self.shape)
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    # --- reverse pass ---
    def backward(self, grad: Optional[ArrayLike] = None) -> None:
        if not self.requires_grad:
            raise ValueError("backward() on a tensor that does not require grad")
        if grad is None:
            if self.size != 1:
                raise ShapeError("backward (implicit grad needs a scalar)", self.shape)
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=self.data.dtype)
        if grad.shape != self.shape:
            raise ShapeError("backward", self.shape, grad.shape)

        # iterative post-order; GRU tapes are deeper than the recursion limit
        topo: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))

        self._accumulate(grad)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # --- elementwise arithmetic ---
    def __add__(self, other) -> "Tensor":
        other = self._lift(other)
        _broadcast_check("add", self, other)
        out = Tensor._result(self.data + other.data, (self, other), "add")
        if out.requires_grad:
            def _backward(g):
                self._accumulate(_unbroadcast(g, self.shape))
                other._accumulate(_unbroadcast(g, other.shape))
            out._backward = _backward
        return out

    def __sub__(self, other) -> "Tensor":
        other = self._lift(other)
        _broadcast_check("sub", self, other)
        out = Tensor._result(self.data - other.data, (self, other), "sub")
        if out.requires_grad:
            def _backward(g):
                self._accumulate(_unbroadcast(g, self.shape))
                other._accumulate(_unbroadcast(-g, other.shape))
            out._backward = _backward
        return out

    def __mul__(self, other) -> "Tensor":
        other = self._lift(other)
        _broadcast_check("mul", self, other)
        out = Tensor._result(self.data * other.data, (self, other), "mul")
        if out.requires_grad:
            def _backward(g):
                if self.requires_grad:
                    self._accumulate(_unbroadcast(g * other.data, self.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(g * self.data, other.shape))
            out._backward = _backward
        return out

    def __truediv__(self, other) -> "Tensor":
        other = self._lift(other)
        _broadcast_check("div", self, other)
        out = Tensor._result(self.data / other.data, (self, other), "div")
        if out.requires_grad:
            def _backward(g):
                if self.requires_grad:
                    self._accumulate(_unbroadcast(g / other.data, self.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(-g * self.data / (other.data * other.data), other.shape))
            out._backward = _backward
        return out

    def __neg__(self) -> "Tensor":
        out = Tensor._result(-self.data, (self,), "neg")
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(-g)
        return out

    def __radd__(self, other) -> "Tensor":
        return self._lift(other) + self

    def __rsub__(self, other) -> "Tensor":
        return self._lift(other) - self

    def __rmul__(self, other) -> "Tensor":
        return self._lift(other) * self

    def __rtruediv__(self, other) -> "Tensor":
        return self._lift(other) / self

    def __pow__(self, p: float) -> "Tensor":
        if isinstance(p, Tensor):
            raise TypeError("only scalar exponents are supported")
        out = Tensor._result(self.data ** p, (self,), "pow")
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g * p * self.data ** (p - 1))
        return out

    def square(self) -> "Tensor":
        return self * self

    # --- unary functions ---
    def exp(self) -> "Tensor":
        y = np.exp(self.data)
        out = Tensor._result(y, (self,), "exp")
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g * y)
        return out

    def log(self) -> "Tensor":
        out = Tensor._result(np.log(self.data), (self,), "log")
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g / self.data)
        return out

    def sqrt(self, eps: float = DISTANCE_EPS) -> "Tensor":
        """sqrt with the derivative taken at max(x, eps), so sqrt(0) back-propagates finitely."""
        y = np.sqrt(np.maximum(self.data, 0.0))
        out = Tensor._result(y, (self,), "sqrt")
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g * 0.5 / np.sqrt(np.maximum(self.data, eps)))
        return out

    def relu(self) -> "Tensor":
        out = Tensor._result(np.maximum(self.data, 0.0).astype(self.data.dtype), (self,), "relu")
        if out.requires_grad:
            # sub-gradient 0 at exactly 0
            out._backward = lambda g: self._accumulate(g * (self.data > 0))
        return out

    def sigmoid(self) -> "Tensor":
        y = np.exp(-np.logaddexp(0.0, -self.data)).astype(self.data.dtype)
        out = Tensor._result(y, (self,), "sigmoid")
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g * y * (1.0 - y))
        return out

    def tanh(self) -> "Tensor":
        y = np.tanh(self.data)
        out = Tensor._result(y, (self,), "tanh")
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g * (1.0 - y * y))
        return out

    # --- reductions ---
    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = Tensor._result(np.asarray(self.data.sum(axis=axis, keepdims=keepdims)), (self,), "sum")
        if out.requires_grad:
            def _backward(g):
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                self._accumulate(np.broadcast_to(g, self.shape))
            out._backward = _backward
        return out

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        count = self.size if axis is None else int(np.prod([self.shape[a] for a in np.atleast_1d(axis)]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def max(self, axis=None, keepdims: bool = False) -> "Tensor":
        """Ties share the gradient equally."""
        m = self.data.max(axis=axis, keepdims=True)
        out = Tensor._result(np.asarray(m if keepdims else np.squeeze(m, axis=axis)), (self,), "max")
        if out.requires_grad:
            def _backward(g):
                if not keepdims:
                    g = np.expand_dims(g, axis) if axis is not None else np.reshape(g, m.shape)
                mask = (self.data == m).astype(self.data.dtype)
                self._accumulate(mask * g / mask.sum(axis=axis, keepdims=True))
            out._backward = _backward
        return out

    # --- shape ops ---
    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        try:
            y = self.data.reshape(shape)
        except ValueError:
            raise ShapeError("reshape", self.shape, shape) from None
        out = Tensor._result(y, (self,), "reshape")
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g.reshape(self.shape))
        return out

    def transpose(self, *axes) -> "Tensor":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inverse = tuple(np.argsort(axes))
        out = Tensor._result(self.data.transpose(axes), (self,), "transpose")
        if out.requires_grad:
            out._backward = lambda g: self._accumulate(g.transpose(inverse))
        return out

    def swapaxes(self, a: int, b: int) -> "Tensor":
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return self.transpose(tuple(axes))

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def __getitem__(self, idx) -> "Tensor":
        out = Tensor._result(np.asarray(self.data[idx]), (self,), "getitem")
        if out.requires_grad:
            def _backward(g):
                full = np.zeros_like(self.data)
                np.add.at(full, idx, g)
                self._accumulate(full)
            out._backward = _backward
        return out

    # --- linear algebra ---
    def __matmul__(self, other) -> "Tensor":
        other = self._lift(other)
        if self.ndim < 2 or other.ndim < 2 or self.shape[-1] != other.shape[-2]:
            raise ShapeError("matmul", self.shape, other.shape)
        try:
            y = np.matmul(self.data, other.data)
        except ValueError:
            raise ShapeError("matmul", self.shape, other.shape) from None
        out = Tensor._result(y, (self, other), "matmul")
        if out.requires_grad:
            def _backward(g):
                if self.requires_grad:
                    self._accumulate(_unbroadcast(np.matmul(g, np.swapaxes(other.data, -1, -2)), self.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(np.matmul(np.swapaxes(self.data, -1, -2), g), other.shape))
            out._backward = _backward
        return out


def tensor(data: ArrayLike, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ValueError("concat needs at least one tensor")
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(a != b for i, (a, b) in enumerate(zip(t.shape, ref)) if i != ax):
            raise ShapeError("concat", ref, t.shape)
    sizes = [t.shape[ax] for t in tensors]
    out = Tensor._result(np.concatenate([t.data for t in tensors], axis=ax), tuple(tensors), "concat")
    if out.requires_grad:
        def _backward(g):
            for t, piece in zip(tensors, np.split(g, np.cumsum(sizes)[:-1], axis=ax)):
                t._accumulate(piece)
        out._backward = _backward
    return out


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ValueError("stack needs at least one tensor")
    ax = axis % (tensors[0].ndim + 1)
    return concat([t.reshape(t.shape[:ax] + (1,) + t.shape[ax:]) for t in tensors], axis=ax)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-subtracted softmax along `axis`."""
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor._result(y, (x,), "softmax")
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(y * (g - (g * y).sum(axis=axis, keepdims=True)))
    return out


def layer_norm(x: Tensor, weight: Optional[Tensor] = None, bias: Optional[Tensor] = None,
               axis: int = -1, eps: float = LAYER_NORM_EPS) -> Tensor:
    mu = x.mean(axis=axis, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    y = xc * (var + eps) ** -0.5
    if weight is not None:
        y = y * weight
    if bias is not None:
        y = y + bias
    return y


def dropout(x: Tensor, p: float, train: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Inverted dropout; identity when p == 0 or outside training."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
    if not train or p == 0.0:
        return x
    rng = rng if rng is not None else np.random.default_rng()
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return x * Tensor(keep, dtype=x.dtype)
