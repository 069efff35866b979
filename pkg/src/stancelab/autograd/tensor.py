"""Reverse-mode autodiff over numpy arrays.

A Tensor wraps one ndarray plus an optional gradient of the same shape.
Ops build a graph of closures; backward() runs them in reverse topological
order, accumulating into .grad. Only the operations the Conv+BiLSTM
architecture needs are provided.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import NumericError


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = tuple(parents)
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Propagate gradients from this node to every reachable leaf."""
        if grad is None:
            if self.size != 1:
                raise ValueError("backward() without an explicit gradient needs a scalar output")
            grad = np.ones_like(self.data)
        self.accumulate(np.asarray(grad, dtype=self.data.dtype))

        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum grad down to `shape` after numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, parents=(a, b))

    def backward(grad):
        if a.requires_grad:
            a.accumulate(_unbroadcast(grad, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(grad, b.shape))

    out._backward = backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, parents=(a, b))

    def backward(grad):
        if a.requires_grad:
            a.accumulate(_unbroadcast(grad * b.data, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(grad * a.data, b.shape))

    out._backward = backward
    return out


def scale(a: Tensor, factor: float) -> Tensor:
    out = Tensor(a.data * factor, parents=(a,))

    def backward(grad):
        if a.requires_grad:
            a.accumulate(grad * factor)

    out._backward = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-d operands, got {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data, parents=(a, b))

    def backward(grad):
        if a.requires_grad:
            a.accumulate(grad @ b.data.T)
        if b.requires_grad:
            b.accumulate(a.data.T @ grad)

    out._backward = backward
    return out


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0), parents=(x,))

    def backward(grad):
        if x.requires_grad:
            x.accumulate(grad * (x.data > 0))

    out._backward = backward
    return out


def mean(x: Tensor) -> Tensor:
    out = Tensor(np.asarray(x.data.mean()), parents=(x,))

    def backward(grad):
        if x.requires_grad:
            x.accumulate(np.full_like(x.data, grad / x.size))

    out._backward = backward
    return out


def softmax(logits: Tensor) -> Tensor:
    """Row-wise softmax over the last axis, stabilized by max subtraction."""
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(p, parents=(logits,))

    def backward(grad):
        if logits.requires_grad:
            dot = (grad * p).sum(axis=-1, keepdims=True)
            logits.accumulate(p * (grad - dot))

    out._backward = backward
    return out


def weighted_cross_entropy(
    probs: Tensor, gold: np.ndarray, weights: np.ndarray | None = None, eps: float = 1e-12
) -> Tensor:
    """Mean over the batch of -w[gold] * ln(p[gold]), with p clamped at eps."""
    gold = np.asarray(gold)
    if gold.ndim != 1 or probs.data.ndim != 2 or gold.shape[0] != probs.shape[0]:
        raise ValueError(f"shape mismatch: probs {probs.shape}, gold {gold.shape}")
    n, c = probs.shape
    if gold.min() < 0 or gold.max() >= c:
        raise ValueError("gold class index out of range")
    w = np.ones(c, dtype=probs.dtype) if weights is None else np.asarray(weights, dtype=probs.dtype)
    py = probs.data[np.arange(n), gold]
    clamped = np.maximum(py, eps)
    loss = float((-w[gold] * np.log(clamped)).mean())
    out = Tensor(np.asarray(loss, dtype=probs.dtype), parents=(probs,))

    def backward(grad):
        if probs.requires_grad:
            g = np.zeros_like(probs.data)
            live = py > eps
            g[np.arange(n), gold] = np.where(live, -w[gold] / clamped, 0.0) * (float(grad) / n)
            probs.accumulate(g)

    out._backward = backward
    return out


def dropout(x: Tensor, rate: float, mode: str, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: train mode zeroes elements w.p. rate and rescales
    survivors by 1/(1-rate); eval mode is the identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "eval" or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    out = Tensor(x.data * keep, parents=(x,))

    def backward(grad):
        if x.requires_grad:
            x.accumulate(grad * keep)

    out._backward = backward
    return out


def check_finite(x: Tensor, what: str = "value") -> Tensor:
    if not np.all(np.isfinite(x.data)):
        raise NumericError(f"non-finite {what} encountered")
    return x
