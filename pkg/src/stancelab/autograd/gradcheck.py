"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Mapping, Sequence

import numpy as np

from ..exceptions import NumericError
from .tensor import Tensor


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor] | Mapping[str, Tensor],
    delta: float = 1e-5,
) -> float:
    """Compare analytic gradients of the scalar computation f against central
    differences over every element of every parameter.

    Returns the maximum relative error |a - n| / max(|a|, |n|, 1e-8). The
    computation must be deterministic (run dropout in eval mode) and is
    re-evaluated twice per parameter element.
    """
    tensors = list(params.values()) if isinstance(params, Mapping) else list(params)
    for p in tensors:
        p.zero_grad()
    loss = f()
    if loss.size != 1:
        raise ValueError("grad_check needs a scalar-valued computation")
    if not np.isfinite(loss.data):
        raise NumericError("non-finite loss in grad_check")
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in tensors]

    worst = 0.0
    for p, a in zip(tensors, analytic):
        flat = p.data.reshape(-1)
        a_flat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + delta
            up = float(f().data)
            flat[i] = orig - delta
            down = float(f().data)
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericError("non-finite loss during finite differencing")
            numeric = (up - down) / (2.0 * delta)
            err = abs(a_flat[i] - numeric) / max(abs(a_flat[i]), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
