"""Network layers as graph ops: embedding lookup, same-padded 1-d convolution,
masked BiLSTM, dense head. All layers are batch-first ([B, L, ...])."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, add, matmul


def embed_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of a [V, d] table for an integer id array [B, L]."""
    ids = np.asarray(ids, dtype=np.int64)
    v = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= v):
        raise ValueError(f"id out of range for table with {v} rows (max id {ids.max()})")
    out = Tensor(table.data[ids], parents=(table,))

    def backward(grad):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, ids.reshape(-1), grad.reshape(-1, table.shape[1]))

    out._backward = backward
    return out


def sequence_mask(lengths: np.ndarray, max_len: int, dtype) -> np.ndarray:
    """[B, L, 1] mask with 1.0 at positions < length."""
    lengths = np.asarray(lengths, dtype=np.int64)
    return (np.arange(max_len)[None, :] < lengths[:, None]).astype(dtype)[:, :, None]


def mask_rows(x: Tensor, lengths: np.ndarray) -> Tensor:
    """Zero every position at or beyond the sample's true length."""
    m = sequence_mask(lengths, x.shape[1], x.dtype)
    out = Tensor(x.data * m, parents=(x,))

    def backward(grad):
        if x.requires_grad:
            x.accumulate(grad * m)

    out._backward = backward
    return out


def conv1d(x: Tensor, kernels: Tensor, bias: Tensor) -> Tensor:
    """Same-padded 1-d convolution over the sequence axis (linear part only;
    apply relu separately). kernels are [F, d_in, k] with k odd."""
    b, l, d_in = x.shape
    f, kd, k = kernels.shape
    if kd != d_in:
        raise ValueError(f"kernel depth {kd} does not match input channels {d_in}")
    if k % 2 == 0:
        raise ValueError(f"kernel size must be odd for same padding, got {k}")
    if bias.shape != (f,):
        raise ValueError(f"bias shape {bias.shape} does not match {f} filters")
    pad = k // 2
    xp = np.zeros((b, l + 2 * pad, d_in), dtype=x.dtype)
    xp[:, pad : pad + l] = x.data
    # windows[b, t, tap, c] -> flattened (tap, c) to match kernel layout [F, tap, c]
    windows = np.stack([xp[:, j : j + l] for j in range(k)], axis=2)
    kmat = kernels.data.transpose(0, 2, 1).reshape(f, k * d_in)
    out_data = windows.reshape(b * l, k * d_in) @ kmat.T + bias.data
    out = Tensor(out_data.reshape(b, l, f), parents=(x, kernels, bias))

    def backward(grad):
        g = grad.reshape(b * l, f)
        if kernels.requires_grad:
            dk = (g.T @ windows.reshape(b * l, k * d_in)).reshape(f, k, d_in)
            kernels.accumulate(dk.transpose(0, 2, 1))
        if bias.requires_grad:
            bias.accumulate(g.sum(axis=0))
        if x.requires_grad:
            dwin = (g @ kmat).reshape(b, l, k, d_in)
            dxp = np.zeros_like(xp)
            for j in range(k):
                dxp[:, j : j + l] += dwin[:, :, j]
            x.accumulate(dxp[:, pad : pad + l])

    out._backward = backward
    return out


@dataclass
class BiLstmParams:
    """Per-direction gate weights; rows ordered (input, forget, cell, output)."""

    fw_w: Tensor  # [4h, d_in]
    fw_u: Tensor  # [4h, h]
    fw_b: Tensor  # [4h]
    bw_w: Tensor
    bw_u: Tensor
    bw_b: Tensor

    def hidden_size(self) -> int:
        return self.fw_u.shape[1]


def _lstm_direction(x_data, lengths, w, u, b, reverse: bool):
    """One direction's forward pass; returns emitted states and the caches
    needed for backpropagation through time."""
    bsz, l, _ = x_data.shape
    h = u.shape[1]
    xw = x_data.reshape(bsz * l, -1) @ w.T
    xw = xw.reshape(bsz, l, 4 * h)
    mask = (np.arange(l)[None, :] < lengths[:, None]).astype(x_data.dtype)
    order = range(l - 1, -1, -1) if reverse else range(l)

    h_state = np.zeros((bsz, h), dtype=x_data.dtype)
    c_state = np.zeros((bsz, h), dtype=x_data.dtype)
    emitted = np.zeros((bsz, l, h), dtype=x_data.dtype)
    caches = {}
    for t in order:
        m = mask[:, t : t + 1]
        pre = xw[:, t] + h_state @ u.T + b
        i = _sigmoid(pre[:, :h])
        f = _sigmoid(pre[:, h : 2 * h])
        g = np.tanh(pre[:, 2 * h : 3 * h])
        o = _sigmoid(pre[:, 3 * h :])
        c_new = f * c_state + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        caches[t] = (i, f, g, o, c_state, tc, h_state, m)
        c_state = m * c_new + (1.0 - m) * c_state
        h_state = m * h_new + (1.0 - m) * h_state
        emitted[:, t] = m * h_new
    return emitted, xw, caches, list(order)


def _lstm_direction_backward(g_emit, x_data, xw, caches, order, w, u):
    """BPTT for one direction; returns (dx, dw, du, db)."""
    bsz, l, d_in = x_data.shape
    h = u.shape[1]
    d_xw = np.zeros_like(xw)
    du = np.zeros_like(u)
    db = np.zeros(4 * h, dtype=x_data.dtype)
    dh = np.zeros((bsz, h), dtype=x_data.dtype)
    dc = np.zeros((bsz, h), dtype=x_data.dtype)
    for t in reversed(order):
        i, f, g, o, c_prev, tc, h_prev, m = caches[t]
        dh_new = m * (g_emit[:, t] + dh)
        dc_new = m * dc + dh_new * o * (1.0 - tc * tc)
        dpre = np.empty((bsz, 4 * h), dtype=x_data.dtype)
        dpre[:, :h] = dc_new * g * i * (1.0 - i)
        dpre[:, h : 2 * h] = dc_new * c_prev * f * (1.0 - f)
        dpre[:, 2 * h : 3 * h] = dc_new * i * (1.0 - g * g)
        dpre[:, 3 * h :] = dh_new * tc * o * (1.0 - o)
        d_xw[:, t] = dpre
        du += dpre.T @ h_prev
        db += dpre.sum(axis=0)
        dh = dpre @ u + (1.0 - m) * dh
        dc = dc_new * f + (1.0 - m) * dc
    flat = d_xw.reshape(bsz * l, 4 * h)
    dw = flat.T @ x_data.reshape(bsz * l, d_in)
    dx = (flat @ w).reshape(bsz, l, d_in)
    return dx, dw, du, db


def _sigmoid(z):
    e = np.exp(-np.abs(z))  # overflow-safe on both tails
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def bilstm(x: Tensor, lengths: np.ndarray, params: BiLstmParams) -> tuple[Tensor, Tensor]:
    """Bidirectional LSTM over a [B, L, d_in] sequence.

    Steps at or beyond a sample's true length neither update state nor emit
    output (the backward direction walks the reversed valid prefix). Returns
    the emitted sequence [B, L, 2h] and the concatenated final states
    [B, 2h]: forward state at the last valid step, backward state at step 1.
    """
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.min() < 1:
        raise ValueError("every sample needs true_length >= 1")
    if lengths.max() > x.shape[1]:
        raise ValueError(f"true_length {lengths.max()} exceeds sequence length {x.shape[1]}")
    h = params.hidden_size()
    fw_emit, fw_xw, fw_caches, fw_order = _lstm_direction(
        x.data, lengths, params.fw_w.data, params.fw_u.data, params.fw_b.data, reverse=False
    )
    bw_emit, bw_xw, bw_caches, bw_order = _lstm_direction(
        x.data, lengths, params.bw_w.data, params.bw_u.data, params.bw_b.data, reverse=True
    )
    seq = Tensor(
        np.concatenate([fw_emit, bw_emit], axis=2),
        parents=(x, params.fw_w, params.fw_u, params.fw_b, params.bw_w, params.bw_u, params.bw_b),
    )

    def backward(grad):
        g_fw = np.ascontiguousarray(grad[:, :, :h])
        g_bw = np.ascontiguousarray(grad[:, :, h:])
        dx_f, dw_f, du_f, db_f = _lstm_direction_backward(
            g_fw, x.data, fw_xw, fw_caches, fw_order, params.fw_w.data, params.fw_u.data
        )
        dx_b, dw_b, du_b, db_b = _lstm_direction_backward(
            g_bw, x.data, bw_xw, bw_caches, bw_order, params.bw_w.data, params.bw_u.data
        )
        if x.requires_grad:
            x.accumulate(dx_f + dx_b)
        for tensor, g in (
            (params.fw_w, dw_f),
            (params.fw_u, du_f),
            (params.fw_b, db_f),
            (params.bw_w, dw_b),
            (params.bw_u, du_b),
            (params.bw_b, db_b),
        ):
            if tensor.requires_grad:
                tensor.accumulate(g)

    seq._backward = backward
    final = bilstm_final(seq, lengths, h)
    return seq, final


def bilstm_final(seq: Tensor, lengths: np.ndarray, h: int) -> Tensor:
    """Gather [forward state at step true_length, backward state at step 1]."""
    bsz = seq.shape[0]
    rows = np.arange(bsz)
    last = np.asarray(lengths, dtype=np.int64) - 1
    out = Tensor(np.concatenate([seq.data[rows, last, :h], seq.data[rows, 0, h:]], axis=1), parents=(seq,))

    def backward(grad):
        if seq.requires_grad:
            g = np.zeros_like(seq.data)
            g[rows, last, :h] = grad[:, :h]
            g[rows, 0, h:] = grad[:, h:]
            seq.accumulate(g)

    out._backward = backward
    return out


def mean_over_valid(x: Tensor, lengths: np.ndarray) -> Tensor:
    """Mean over each sample's valid positions (rows beyond length must be zero)."""
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.min() < 1:
        raise ValueError("every sample needs true_length >= 1")
    inv = (1.0 / lengths).astype(x.dtype)[:, None]
    out = Tensor(x.data.sum(axis=1) * inv, parents=(x,))

    def backward(grad):
        if x.requires_grad:
            m = sequence_mask(lengths, x.shape[1], x.dtype)
            x.accumulate((grad * inv)[:, None, :] * m)

    out._backward = backward
    return out


def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine head: x @ w.T + b for w of shape [out, in]."""
    if x.shape[-1] != w.shape[1]:
        raise ValueError(f"dense shape mismatch: input {x.shape} vs weight {w.shape}")
    return add(matmul(x, transpose(w)), b)


def transpose(x: Tensor) -> Tensor:
    out = Tensor(x.data.T, parents=(x,))

    def backward(grad):
        if x.requires_grad:
            x.accumulate(grad.T)

    out._backward = backward
    return out
