"""Adam with bias correction, operating in place on parameter tensors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: dict[str, Tensor]) -> "AdamState":
        return cls(
            m={name: np.zeros_like(p.data) for name, p in params.items()},
            v={name: np.zeros_like(p.data) for name, p in params.items()},
        )


def adam_step(
    params: dict[str, Tensor],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One Adam update from each parameter's .grad (missing grads count as zero)."""
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for name, p in params.items():
        m = state.m.get(name)
        if m is None or m.shape != p.data.shape:
            raise ValueError(f"optimizer state does not match parameter {name!r}")
        g = p.grad if p.grad is not None else 0.0
        state.m[name] = beta1 * m + (1.0 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * np.square(g)
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        p.data -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.data.dtype, copy=False)
