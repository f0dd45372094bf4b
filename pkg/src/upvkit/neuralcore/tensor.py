"""Reverse-mode automatic differentiation over float64 numpy arrays.

Only the operations the classifier needs exist here: elementwise arithmetic,
a few matmul shapes, activations, masked softmax, attention pooling, dropout,
and the weighted binary cross-entropy reduction.  Every op validates that its
output is finite, so a diverging run fails at the op that produced the first
NaN instead of ten steps later.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class NonFiniteError(FloatingPointError):
    """An op produced NaN or Inf."""


class GraphError(RuntimeError):
    """Backward called on a tensor that is not part of a recorded graph."""


_finite_checks = True


def set_finite_checks(enabled: bool) -> bool:
    """Toggle per-op NaN/Inf validation; returns the previous setting."""
    global _finite_checks
    previous = _finite_checks
    _finite_checks = enabled
    return previous


class Tensor:
    """A float64 array plus an optional gradient and backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        if _finite_checks and not np.all(np.isfinite(self.data)):
            raise NonFiniteError("tensor initialised with non-finite values")
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar used by model code
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _accumulate(t: Tensor, grad: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += grad


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reverse numpy broadcasting: sum the gradient down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar loss through the recorded graph."""
    if loss.data.ndim != 0:
        raise GraphError("backward expects a scalar loss")
    if not loss.requires_grad or loss._backward is None and not loss._parents:
        raise GraphError("tensor is not part of a recorded computation")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# elementwise and linear algebra


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def backward_fn(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _result(data, (a, b), backward_fn)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def backward_fn(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _result(data, (a, b), backward_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Supported shapes: (m,k)@(k,n), (B,t,k)@(k,n), (m,k)@(k,), (B,t,k)@(k,)."""
    a, b = as_tensor(a), as_tensor(b)
    data = a.data @ b.data

    def backward_fn(g):
        if b.data.ndim == 2:
            _accumulate(a, g @ b.data.T)
            if b.requires_grad:
                ga = a.data.reshape(-1, a.data.shape[-1])
                gg = g.reshape(-1, g.shape[-1])
                _accumulate(b, ga.T @ gg)
        elif b.data.ndim == 1:
            _accumulate(a, g[..., None] * b.data)
            if b.requires_grad:
                ga = a.data.reshape(-1, a.data.shape[-1])
                _accumulate(b, g.reshape(-1) @ ga)
        else:
            raise GraphError("unsupported matmul operand rank")

    return _result(data, (a, b), backward_fn)


def tanh(x: Tensor) -> Tensor:
    x = as_tensor(x)
    data = np.tanh(x.data)

    def backward_fn(g):
        _accumulate(x, g * (1.0 - data * data))

    return _result(data, (x,), backward_fn)


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    z = x.data
    data = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))

    def backward_fn(g):
        _accumulate(x, g * data * (1.0 - data))

    return _result(data, (x,), backward_fn)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    data = x.data.reshape(shape)

    def backward_fn(g):
        _accumulate(x, g.reshape(x.data.shape))

    return _result(data, (x,), backward_fn)


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]

    def backward_fn(g):
        offset = 0
        for p, size in zip(parts, sizes):
            index = [slice(None)] * g.ndim
            index[axis if axis >= 0 else g.ndim + axis] = slice(offset, offset + size)
            _accumulate(p, g[tuple(index)])
            offset += size

    return _result(data, tuple(parts), backward_fn)


def mean(x: Tensor) -> Tensor:
    x = as_tensor(x)
    data = x.data.mean()

    def backward_fn(g):
        _accumulate(x, np.full_like(x.data, g / x.data.size))

    return _result(data, (x,), backward_fn)


# ---------------------------------------------------------------------------
# model-specific fused ops


def masked_softmax(scores: Tensor, mask: np.ndarray) -> Tensor:
    """Softmax over axis 1 with masked positions pinned to exactly zero."""
    if not mask.any(axis=1).all():
        raise ValueError("softmax over a fully masked row")
    s = np.where(mask, scores.data, -np.inf)
    s_max = s.max(axis=1, keepdims=True)
    e = np.exp(s - s_max)
    e[~mask] = 0.0
    data = e / e.sum(axis=1, keepdims=True)

    def backward_fn(g):
        inner = (g * data).sum(axis=1, keepdims=True)
        _accumulate(scores, data * (g - inner))

    return _result(data, (scores,), backward_fn)


def weighted_pool(alpha: Tensor, h_seq: Tensor) -> Tensor:
    """Attention pooling: (B,T) weights applied to (B,T,H) states -> (B,H)."""
    data = np.einsum("bt,bth->bh", alpha.data, h_seq.data)

    def backward_fn(g):
        if alpha.requires_grad:
            _accumulate(alpha, np.einsum("bh,bth->bt", g, h_seq.data))
        if h_seq.requires_grad:
            _accumulate(h_seq, alpha.data[:, :, None] * g[:, None, :])

    return _result(data, (alpha, h_seq), backward_fn)


def last_state(h_seq: Tensor, lengths: np.ndarray) -> Tensor:
    """Select the final unmasked hidden state per sequence."""
    if (lengths < 1).any():
        raise ValueError("cannot pool an empty sequence")
    rows = np.arange(h_seq.data.shape[0])
    idx = lengths - 1
    data = h_seq.data[rows, idx]

    def backward_fn(g):
        if h_seq.requires_grad:
            full = np.zeros_like(h_seq.data)
            full[rows, idx] = g
            _accumulate(h_seq, full)

    return _result(data, (h_seq,), backward_fn)


def dropout(x: Tensor, rate: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout; the identity outside training mode."""
    if not training or rate <= 0.0:
        return x
    keep = 1.0 - rate
    mask = (rng.random(x.data.shape) < keep) / keep
    data = x.data * mask

    def backward_fn(g):
        _accumulate(x, g * mask)

    return _result(data, (x,), backward_fn)


_CLAMP = 1e-12


def weighted_bce(probs: Tensor, targets: np.ndarray, weights: np.ndarray) -> Tensor:
    """Per-instance weighted binary cross-entropy, averaged over the batch.

    Probabilities are clamped at 1e-12 so a saturated sigmoid cannot produce
    log(0); the gradient uses the clamped values and therefore stays finite.
    """
    p = np.clip(probs.data, _CLAMP, 1.0 - _CLAMP)
    losses = -(targets * np.log(p) + (1.0 - targets) * np.log(1.0 - p))
    data = np.asarray((weights * losses).mean())

    def backward_fn(g):
        grad = weights * (p - targets) / (p * (1.0 - p)) / probs.data.size
        _accumulate(probs, g * grad)

    return _result(data, (probs,), backward_fn)


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    return add(matmul(x, weight), bias)
