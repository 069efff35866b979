from .tensor import (
    Tensor,
    add,
    check_finite,
    dropout,
    matmul,
    mean,
    mul,
    relu,
    scale,
    softmax,
    weighted_cross_entropy,
)
from .layers import (
    BiLstmParams,
    bilstm,
    bilstm_final,
    conv1d,
    dense,
    embed_lookup,
    mask_rows,
    mean_over_valid,
    sequence_mask,
    transpose,
)
from .optim import AdamState, adam_step
from .gradcheck import grad_check

__all__ = [
    "AdamState",
    "BiLstmParams",
    "Tensor",
    "adam_step",
    "add",
    "bilstm",
    "bilstm_final",
    "check_finite",
    "conv1d",
    "dense",
    "dropout",
    "embed_lookup",
    "grad_check",
    "mask_rows",
    "matmul",
    "mean",
    "mean_over_valid",
    "mul",
    "relu",
    "scale",
    "sequence_mask",
    "softmax",
    "transpose",
    "weighted_cross_entropy",
]
