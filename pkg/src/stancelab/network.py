"""Model assembly: encoder -> Conv stack -> BiLSTM -> dense head, plus
bit-exact checkpoint serialization.

The encoder is pluggable: a trainable embedding table (desk scale) or
per-sample vector sequences precomputed offline by any external contextual
encoder. Everything downstream is identical either way.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from . import autograd as ag
from .exceptions import DataError
from .preprocessing import EncodedText

_DTYPES = {"f32": np.float32, "f64": np.float64}


@dataclass
class ModelConfig:
    vocab_size: int
    num_classes: int
    embed_dim: int = 32
    conv_layers: int = 2
    conv_filters: int = 16
    kernel: int = 3
    use_bilstm: bool = True
    lstm_hidden: int = 32  # 768 at paper scale; 32 keeps desk runs fast
    dropout: float = 0.25
    max_len: int = 64
    encoder: str = "trainable_embedding"  # or "precomputed_file"
    dtype: str = "f32"

    def validate(self) -> "ModelConfig":
        if self.num_classes not in (2, 3):
            raise ValueError(f"num_classes must be 2 or 3, got {self.num_classes}")
        if self.kernel % 2 == 0 or self.kernel < 1:
            raise ValueError(f"kernel must be odd and positive, got {self.kernel}")
        if self.conv_layers < 0:
            raise ValueError(f"conv_layers must be >= 0, got {self.conv_layers}")
        for name in ("vocab_size", "embed_dim", "conv_filters", "lstm_hidden", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.encoder not in ("trainable_embedding", "precomputed_file"):
            raise ValueError(f"unknown encoder kind {self.encoder!r}")
        if self.dtype not in _DTYPES:
            raise ValueError(f"dtype must be one of {sorted(_DTYPES)}, got {self.dtype!r}")
        return self

    def np_dtype(self):
        return _DTYPES[self.dtype]

    def feature_dim(self) -> int:
        """Channel width entering the head's input stage."""
        if self.conv_layers > 0:
            return self.conv_filters
        return self.embed_dim

    def head_input_dim(self) -> int:
        return 2 * self.lstm_hidden if self.use_bilstm else self.feature_dim()


@dataclass
class Model:
    config: ModelConfig
    params: dict[str, ag.Tensor]
    rng: np.random.Generator

    def head_names(self) -> tuple[str, str]:
        return ("head.W", "head.b")

    def non_head_params(self) -> dict[str, ag.Tensor]:
        head = set(self.head_names())
        return {k: v for k, v in self.params.items() if k not in head}


def _param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    if config.encoder == "trainable_embedding":
        shapes["embed.table"] = (config.vocab_size, config.embed_dim)
    d_in = config.embed_dim
    for i in range(1, config.conv_layers + 1):
        shapes[f"conv{i}.kernels"] = (config.conv_filters, d_in, config.kernel)
        shapes[f"conv{i}.bias"] = (config.conv_filters,)
        d_in = config.conv_filters
    if config.use_bilstm:
        h = config.lstm_hidden
        for direction in ("fw", "bw"):
            shapes[f"lstm.{direction}.W"] = (4 * h, d_in)
            shapes[f"lstm.{direction}.U"] = (4 * h, h)
            shapes[f"lstm.{direction}.b"] = (4 * h,)
    shapes["head.W"] = (config.num_classes, config.head_input_dim())
    shapes["head.b"] = (config.num_classes,)
    return shapes


def _glorot_fans(name: str, shape: tuple[int, ...], config: ModelConfig) -> tuple[int, int]:
    if name.endswith(".kernels"):
        f, d_in, k = shape
        return d_in * k, f * k
    if name == "embed.table":
        return shape[0], shape[1]
    return shape[1], shape[0]  # weight matrices stored [out, in]


def _init_param(name: str, shape: tuple[int, ...], config: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    dtype = config.np_dtype()
    if name.endswith((".b", ".bias")):
        data = np.zeros(shape, dtype=dtype)
        if name.startswith("lstm."):
            h = config.lstm_hidden
            data[h : 2 * h] = 1.0  # forget gate opens at init
        return data
    fan_in, fan_out = _glorot_fans(name, shape, config)
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def build_model(config: ModelConfig, seed: int) -> Model:
    """Deterministically initialize all parameters (Glorot-uniform weights,
    zero biases, forget-gate bias 1)."""
    config.validate()
    rng = np.random.default_rng(seed)
    params = {
        name: ag.Tensor(_init_param(name, shape, config, rng), requires_grad=True)
        for name, shape in _param_shapes(config).items()
    }
    return Model(config=config, params=params, rng=np.random.default_rng((seed, 0xD120)))


@dataclass
class PrecomputedText:
    """One sample's externally encoded vector sequence."""

    vectors: np.ndarray  # [L, d]
    true_length: int


def as_batch(samples: Sequence[EncodedText]) -> tuple[np.ndarray, np.ndarray]:
    ids = np.stack([s.ids for s in samples])
    lengths = np.array([s.true_length for s in samples], dtype=np.int64)
    return ids, lengths


def _conv_params(model: Model, i: int) -> tuple[ag.Tensor, ag.Tensor]:
    return model.params[f"conv{i}.kernels"], model.params[f"conv{i}.bias"]


def _bilstm_params(model: Model) -> ag.BiLstmParams:
    p = model.params
    return ag.BiLstmParams(
        fw_w=p["lstm.fw.W"], fw_u=p["lstm.fw.U"], fw_b=p["lstm.fw.b"],
        bw_w=p["lstm.bw.W"], bw_u=p["lstm.bw.U"], bw_b=p["lstm.bw.b"],
    )


def forward(
    model: Model,
    batch: Sequence[EncodedText | PrecomputedText],
    mode: str = "eval",
    rng: np.random.Generator | None = None,
) -> ag.Tensor:
    """Class probabilities [B, C] for a batch of encoded samples."""
    if not batch:
        raise ValueError("empty batch")
    cfg = model.config
    if mode == "train" and rng is None:
        rng = model.rng
    if cfg.encoder == "trainable_embedding":
        ids, lengths = as_batch(batch)  # raises on precomputed input
        x = ag.embed_lookup(model.params["embed.table"], ids)
    else:
        vecs = np.stack([np.asarray(s.vectors, dtype=cfg.np_dtype()) for s in batch])
        lengths = np.array([s.true_length for s in batch], dtype=np.int64)
        if vecs.shape[2] != cfg.embed_dim:
            raise ValueError(f"precomputed vectors have dim {vecs.shape[2]}, config says {cfg.embed_dim}")
        x = ag.Tensor(vecs)
    if lengths.min() < 1:
        raise ValueError("batch contains a sample with true_length 0")
    x = ag.mask_rows(x, lengths)
    x = ag.dropout(x, cfg.dropout, mode, rng)
    for i in range(1, cfg.conv_layers + 1):
        kernels, bias = _conv_params(model, i)
        x = ag.relu(ag.conv1d(x, kernels, bias))
        x = ag.mask_rows(x, lengths)
        x = ag.dropout(x, cfg.dropout, mode, rng)
    if cfg.use_bilstm:
        _, feat = ag.bilstm(x, lengths, _bilstm_params(model))
    else:
        feat = ag.mean_over_valid(x, lengths)
    feat = ag.dropout(feat, cfg.dropout, mode, rng)
    logits = ag.dense(feat, model.params["head.W"], model.params["head.b"])
    return ag.softmax(logits)


def predict_proba(model: Model, samples: Sequence, batch_size: int = 64) -> np.ndarray:
    chunks = [
        forward(model, samples[i : i + batch_size], mode="eval").data
        for i in range(0, len(samples), batch_size)
    ]
    return np.concatenate(chunks, axis=0)


def predict_classes(model: Model, samples: Sequence, batch_size: int = 64) -> np.ndarray:
    return predict_proba(model, samples, batch_size).argmax(axis=1)


def swap_head(model: Model, new_num_classes: int, seed: int) -> Model:
    """Fresh classification head; every other tensor is copied bit-exactly."""
    config = replace(model.config, num_classes=new_num_classes).validate()
    rng = np.random.default_rng(seed)
    params: dict[str, ag.Tensor] = {}
    for name, shape in _param_shapes(config).items():
        if name in ("head.W", "head.b"):
            params[name] = ag.Tensor(_init_param(name, shape, config, rng), requires_grad=True)
        else:
            params[name] = ag.Tensor(model.params[name].data.copy(), requires_grad=True)
    return Model(config=config, params=params, rng=np.random.default_rng((seed, 0xD120)))


def clone_model(model: Model) -> Model:
    params = {name: ag.Tensor(p.data.copy(), requires_grad=True) for name, p in model.params.items()}
    return Model(config=replace(model.config), params=params, rng=model.rng)


_CHECKPOINT_DTYPES = {"f32": "<f4", "f64": "<f8"}


def save_checkpoint(model: Model, path: str) -> None:
    """Write manifest.tsv + weights.bin + config.tsv under `path`."""
    os.makedirs(path, exist_ok=True)
    offset = 0
    manifest_lines = []
    blobs = []
    for name, tensor in model.params.items():
        dtype_key = "f64" if tensor.data.dtype == np.float64 else "f32"
        raw = np.ascontiguousarray(tensor.data, dtype=_CHECKPOINT_DTYPES[dtype_key]).tobytes()
        dims = ",".join(str(d) for d in tensor.data.shape)
        manifest_lines.append(f"{name}\t{dtype_key}\t{dims}\t{offset}\t{len(raw)}")
        blobs.append(raw)
        offset += len(raw)
    with open(os.path.join(path, "manifest.tsv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(manifest_lines) + "\n")
    with open(os.path.join(path, "weights.bin"), "wb") as fh:
        fh.write(b"".join(blobs))
    with open(os.path.join(path, "config.tsv"), "w", encoding="utf-8") as fh:
        for f in fields(ModelConfig):
            fh.write(f"{f.name}\t{getattr(model.config, f.name)}\n")


def _parse_config(path: str) -> ModelConfig:
    raw: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, value = line.partition("\t")
            raw[key] = value
    kwargs = {}
    for f in fields(ModelConfig):
        if f.name not in raw:
            raise DataError(f"{path}: missing config key {f.name!r}")
        value = raw[f.name]
        if f.type in ("int",):
            kwargs[f.name] = int(value)
        elif f.type in ("float",):
            kwargs[f.name] = float(value)
        elif f.type in ("bool",):
            kwargs[f.name] = value == "True"
        else:
            kwargs[f.name] = value
    return ModelConfig(**kwargs)


def load_checkpoint(path: str) -> Model:
    """Rebuild a model bit-exactly from a checkpoint directory."""
    manifest_path = os.path.join(path, "manifest.tsv")
    weights_path = os.path.join(path, "weights.bin")
    config_path = os.path.join(path, "config.tsv")
    for p in (manifest_path, weights_path, config_path):
        if not os.path.isfile(p):
            raise DataError(f"no such file: {p}")
    config = _parse_config(config_path).validate()
    with open(weights_path, "rb") as fh:
        blob = fh.read()

    entries: dict[str, tuple[str, tuple[int, ...], int, int]] = {}
    cursor = 0
    with open(manifest_path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise DataError(f"{manifest_path}:{ln}: expected 5 columns")
            name, dtype_key, dims, offset_s, nbytes_s = parts
            if dtype_key not in _CHECKPOINT_DTYPES:
                raise DataError(f"{manifest_path}: tensor {name!r} has unknown dtype {dtype_key!r}")
            offset, nbytes = int(offset_s), int(nbytes_s)
            if offset != cursor:
                raise DataError(f"{manifest_path}: tensor {name!r} offset {offset} overlaps or leaves a gap")
            cursor = offset + nbytes
            shape = tuple(int(d) for d in dims.split(",")) if dims else ()
            entries[name] = (dtype_key, shape, offset, nbytes)
    if cursor != len(blob):
        raise DataError(f"{weights_path}: blob length mismatch (manifest covers {cursor}, file has {len(blob)})")

    expected = _param_shapes(config)
    for name, shape in expected.items():
        if name not in entries:
            raise DataError(f"{manifest_path}: missing tensor {name!r} required by config")
        if entries[name][1] != shape:
            raise DataError(f"{manifest_path}: tensor {name!r} has shape {entries[name][1]}, config needs {shape}")
    for name in entries:
        if name not in expected:
            raise DataError(f"{manifest_path}: unexpected tensor {name!r}")

    params: dict[str, ag.Tensor] = {}
    for name in expected:
        dtype_key, shape, offset, nbytes = entries[name]
        stored = np.dtype(_CHECKPOINT_DTYPES[dtype_key])
        arr = np.frombuffer(blob, dtype=stored, count=nbytes // stored.itemsize, offset=offset)
        if arr.size != int(np.prod(shape) if shape else 1):
            raise DataError(f"{manifest_path}: tensor {name!r} byte length does not match its shape")
        native = np.float64 if dtype_key == "f64" else np.float32
        params[name] = ag.Tensor(arr.reshape(shape).astype(native), requires_grad=True)
    return Model(config=config, params=params, rng=np.random.default_rng(0))


def write_precomputed(path: str, samples: dict[str, np.ndarray], max_len: int, dim: int) -> None:
    """Write the precomputed-encoder file: header then id<TAB>L*d floats."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#L={max_len}\td={dim}\n")
        for sample_id, vectors in samples.items():
            if vectors.shape != (max_len, dim):
                raise ValueError(f"sample {sample_id!r} has shape {vectors.shape}, expected {(max_len, dim)}")
            flat = " ".join(repr(float(v)) for v in vectors.reshape(-1))
            fh.write(f"{sample_id}\t{flat}\n")


def load_precomputed(path: str) -> tuple[dict[str, PrecomputedText], int, int]:
    """Read precomputed vector sequences; true_length is inferred as the last
    non-zero row + 1 (trailing rows must be zero padding)."""
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        try:
            l_part, d_part = header.split("\t")
            max_len = int(l_part.split("=")[1])
            dim = int(d_part.split("=")[1])
        except (ValueError, IndexError):
            raise DataError(f"{path}: bad header {header!r}, expected '#L=<n>\\td=<n>'") from None
        out: dict[str, PrecomputedText] = {}
        for ln, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            sample_id, _, rest = line.partition("\t")
            values = np.array(rest.split(), dtype=np.float64)
            if values.size != max_len * dim:
                raise DataError(f"{path}:{ln}: expected {max_len * dim} floats, found {values.size}")
            vectors = values.reshape(max_len, dim)
            nonzero = np.nonzero(np.abs(vectors).sum(axis=1))[0]
            true_length = int(nonzero[-1]) + 1 if nonzero.size else 1
            out[sample_id] = PrecomputedText(vectors=vectors, true_length=true_length)
    return out, max_len, dim
