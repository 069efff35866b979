"""Training protocol and experiment orchestration.

The protocol: Adam over mini-batches of 16 with weighted cross-entropy,
exponentially decaying learning rate, early stopping on validation accuracy
(patience 5, never before epoch 10), best-epoch restoration; sarcasm
pretraining via 5-fold CV (small sets) or an 80/20 split (large sets), head
swap, then stance fine-tuning in-domain or cross-target, averaged over
seeds.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from . import autograd as ag
from .datasets import (
    SARCASM_CLASSES,
    STANCE_CLASSES,
    LabeledText,
    SarcasmDataset,
    StanceDataset,
    assemble_cross_target,
    class_weights,
    kfold,
    load_sarcasm_dataset,
    load_stance_dataset,
    ratio_split,
)
from .exceptions import DataError, NumericError, UsageError
from .metrics import EvalResult, PredictionRecord
from .network import (
    Model,
    ModelConfig,
    build_model,
    clone_model,
    forward,
    load_checkpoint,
    predict_classes,
    save_checkpoint,
    swap_head,
)
from .preprocessing import (
    DEFAULT_NORMALIZER,
    EncodedText,
    NormalizerConfig,
    Vocab,
    build_vocab,
    encode,
    normalize,
)

LR_FLOOR_INTERMEDIATE = 1e-9
LR_FLOOR_TARGET = 1e-10


@dataclass
class TrainConfig:
    batch_size: int = 16
    lr_init: float = 3e-5
    lr_floor: float | None = None  # resolved per phase: 1e-9 intermediate, 1e-10 target
    max_epochs: int = 50
    min_epochs: int = 10
    patience: int = 5
    use_class_weights: bool = True
    seed: int = 0

    def validate(self) -> "TrainConfig":
        if self.min_epochs > self.max_epochs:
            raise ValueError(f"min_epochs {self.min_epochs} exceeds max_epochs {self.max_epochs}")
        if self.min_epochs < 1 or self.patience < 1 or self.batch_size < 1:
            raise ValueError("min_epochs, patience and batch_size must be >= 1")
        if self.lr_floor is not None and not 0 < self.lr_floor < self.lr_init:
            raise ValueError(f"lr_floor {self.lr_floor} must be positive and below lr_init {self.lr_init}")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        return self

    def resolved(self, phase: str) -> "TrainConfig":
        if self.lr_floor is not None:
            return self
        floor = {"intermediate": LR_FLOOR_INTERMEDIATE, "target": LR_FLOOR_TARGET}[phase]
        return replace(self, lr_floor=floor)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    stop_epoch: int = 0
    best_epoch: int = 0

    def best_val_accuracy(self) -> float:
        return self.val_accuracy[self.best_epoch - 1]


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    """Exponential decay from lr_init (epoch 1) to lr_floor (epoch max_epochs),
    both endpoints exact."""
    if cfg.lr_floor is None:
        raise ValueError("lr_floor is unresolved; call cfg.resolved(phase) first")
    if not 1 <= epoch <= cfg.max_epochs:
        raise ValueError(f"epoch {epoch} outside [1, {cfg.max_epochs}]")
    if epoch == 1:
        return cfg.lr_init
    if epoch == cfg.max_epochs:
        return cfg.lr_floor
    ratio = cfg.lr_floor / cfg.lr_init
    return cfg.lr_init * ratio ** ((epoch - 1) / (cfg.max_epochs - 1))


class EarlyStopping:
    """Stop once validation accuracy shows no strict improvement for
    `patience` consecutive epochs. A plateau completed before `min_epochs`
    does not stop training; its counter restarts, so the earliest stop is
    the first full plateau ending at or after min_epochs."""

    def __init__(self, min_epochs: int, patience: int):
        self.min_epochs = min_epochs
        self.patience = patience
        self.best = -math.inf
        self.best_epoch = 0
        self._streak = 0

    def update(self, epoch: int, value: float) -> bool:
        if value > self.best:
            self.best = value
            self.best_epoch = epoch
            self._streak = 0
            return False
        self._streak += 1
        if self._streak >= self.patience:
            if epoch >= self.min_epochs:
                return True
            self._streak = 0
        return False


def _accuracy(model: Model, samples: Sequence[EncodedText], labels: np.ndarray) -> float:
    preds = predict_classes(model, samples)
    return float((preds == labels).mean())


def train(
    model: Model,
    train_data: tuple[Sequence[EncodedText], np.ndarray],
    val_data: tuple[Sequence[EncodedText], np.ndarray],
    cfg: TrainConfig,
    weights: np.ndarray | None = None,
    batch_callback: Callable[[int, int, int, float], None] | None = None,
) -> tuple[Model, TrainHistory]:
    """Run the epoch loop and return the model restored to its best epoch.

    `weights` overrides the per-class loss weights; by default they are
    balanced inverse frequencies of the training labels (when enabled).
    """
    cfg = cfg.validate()
    if cfg.lr_floor is None:
        cfg = cfg.resolved("target")
    x_train, y_train = train_data
    x_val, y_val = val_data
    y_train = np.asarray(y_train, dtype=np.int64)
    y_val = np.asarray(y_val, dtype=np.int64)
    if len(x_train) == 0 or len(x_val) == 0:
        raise ValueError("train and validation sets must be non-empty")
    if len(x_train) != len(y_train) or len(x_val) != len(y_val):
        raise ValueError("samples and labels have different lengths")
    n_classes = model.config.num_classes
    if y_train.max() >= n_classes or y_val.max() >= n_classes:
        raise ValueError("label index outside the model's class count")

    if weights is None and cfg.use_class_weights:
        counts = np.bincount(y_train, minlength=n_classes)
        cw = class_weights({i: int(c) for i, c in enumerate(counts)})
        weights = cw.as_array(range(n_classes))
    weights_arr = None if weights is None else np.asarray(weights, dtype=np.float64)

    state = ag.AdamState.for_params(model.params)
    dropout_rng = np.random.default_rng((cfg.seed, 0xD0))
    stopper = EarlyStopping(cfg.min_epochs, cfg.patience)
    history = TrainHistory()
    best_params: dict[str, np.ndarray] = {}

    n = len(x_train)
    for epoch in range(1, cfg.max_epochs + 1):
        lr = lr_schedule(epoch, cfg)
        order = np.random.default_rng((cfg.seed, epoch)).permutation(n)
        loss_sum = 0.0
        for step, start in enumerate(range(0, n, cfg.batch_size), start=1):
            idx = order[start : start + cfg.batch_size]
            batch = [x_train[i] for i in idx]
            probs = forward(model, batch, mode="train", rng=dropout_rng)
            loss = ag.weighted_cross_entropy(probs, y_train[idx], weights_arr)
            loss_val = loss.item()
            if not np.isfinite(loss_val):
                raise NumericError(f"non-finite loss at epoch {epoch} step {step} (lr={lr:g})")
            for p in model.params.values():
                p.zero_grad()
            loss.backward()
            ag.adam_step(model.params, state, lr)
            loss_sum += loss_val * len(idx)
            if batch_callback is not None:
                batch_callback(epoch, step, len(idx), loss_val)

        val_acc = _accuracy(model, x_val, y_val)
        history.train_loss.append(loss_sum / n)
        history.val_accuracy.append(val_acc)
        history.lr.append(lr)
        improved = val_acc > stopper.best
        stop = stopper.update(epoch, val_acc)
        if improved:
            best_params = {name: p.data.copy() for name, p in model.params.items()}
        history.stop_epoch = epoch
        if stop:
            break

    history.best_epoch = stopper.best_epoch
    best_model = Model(
        config=replace(model.config),
        params={name: ag.Tensor(data.copy(), requires_grad=True) for name, data in best_params.items()},
        rng=model.rng,
    )
    return best_model, history


def encode_samples(
    samples: Sequence[LabeledText],
    vocab: Vocab,
    max_len: int,
    normalizer: NormalizerConfig = DEFAULT_NORMALIZER,
) -> list[EncodedText]:
    return [encode(normalize(s.text, normalizer), vocab, max_len) for s in samples]


def stance_label_indices(samples: Sequence[LabeledText]) -> np.ndarray:
    return np.array([STANCE_CLASSES.index(s.label) for s in samples], dtype=np.int64)


def sarcasm_label_indices(samples: Sequence[LabeledText]) -> np.ndarray:
    return np.array([SARCASM_CLASSES.index(s.label) for s in samples], dtype=np.int64)


@dataclass
class PretrainResult:
    model: Model
    histories: list[TrainHistory]
    val_accuracies: list[float]
    checkpoint_path: str | None = None


def pretrain_intermediate(
    sarcasm: SarcasmDataset | str,
    vocab: Vocab,
    model_cfg: ModelConfig,
    cfg: TrainConfig,
    size_threshold: int = 10_000,
    cv_folds: int = 5,
    checkpoint_dir: str | None = None,
    normalizer: NormalizerConfig = DEFAULT_NORMALIZER,
) -> PretrainResult:
    """Pretrain a binary sarcasm model; below `size_threshold` samples this
    runs k-fold CV and keeps the fold model with the highest validation
    accuracy, otherwise a single stratified 80/20 run."""
    ds = load_sarcasm_dataset(sarcasm) if isinstance(sarcasm, str) else sarcasm
    labels_present = {s.label for s in ds.samples}
    if len(labels_present) < 2:
        raise DataError(f"degenerate labels: only {next(iter(labels_present)).value} present")
    cfg = cfg.validate().resolved("intermediate")
    model_cfg = replace(model_cfg, num_classes=2).validate()

    # Weights come from the full dataset so every fold sees the same scale.
    counts = {label: sum(1 for s in ds.samples if s.label is label) for label in SARCASM_CLASSES}
    weights = class_weights(counts).as_array(SARCASM_CLASSES) if cfg.use_class_weights else None

    def prepared(samples):
        return encode_samples(samples, vocab, model_cfg.max_len, normalizer), sarcasm_label_indices(samples)

    splits: list[tuple[list[LabeledText], list[LabeledText]]] = []
    if len(ds.samples) < size_threshold:
        folds = kfold(ds.samples, cv_folds, cfg.seed)
        for i in range(cv_folds):
            train_part = [s for j, fold in enumerate(folds) if j != i for s in fold]
            splits.append((train_part, folds[i]))
    else:
        splits.append(ratio_split(ds.samples, 0.8, cfg.seed))

    best: tuple[float, int] | None = None
    best_model: Model | None = None
    histories: list[TrainHistory] = []
    accuracies: list[float] = []
    for i, (train_part, val_part) in enumerate(splits):
        model = build_model(model_cfg, cfg.seed)
        fitted, history = train(model, prepared(train_part), prepared(val_part), cfg, weights=weights)
        histories.append(history)
        acc = history.best_val_accuracy()
        accuracies.append(acc)
        if best is None or acc > best[0]:
            best = (acc, i)
            best_model = fitted

    path = None
    if checkpoint_dir is not None:
        save_checkpoint(best_model, checkpoint_dir)
        path = checkpoint_dir
    return PretrainResult(model=best_model, histories=histories, val_accuracies=accuracies, checkpoint_path=path)


def _check_architecture(ckpt: Model, expected_cfg: ModelConfig) -> None:
    reference = build_model(replace(expected_cfg, num_classes=ckpt.config.num_classes), seed=0)
    mismatches = []
    ckpt_nonhead = ckpt.non_head_params()
    ref_nonhead = reference.non_head_params()
    for name in sorted(set(ckpt_nonhead) | set(ref_nonhead)):
        a = ckpt_nonhead.get(name)
        b = ref_nonhead.get(name)
        if a is None or b is None or a.shape != b.shape:
            mismatches.append(f"{name}: checkpoint {None if a is None else a.shape} vs config {None if b is None else b.shape}")
    if mismatches:
        raise ValueError("checkpoint architecture mismatch:\n  " + "\n  ".join(mismatches))


@dataclass
class FinetuneResult:
    eval: EvalResult
    model: Model
    history: TrainHistory


def finetune_target(
    checkpoint: Model | str | None,
    train_samples: Sequence[LabeledText],
    val_samples: Sequence[LabeledText] | None,
    test_samples: Sequence[LabeledText],
    vocab: Vocab,
    model_cfg: ModelConfig,
    cfg: TrainConfig,
    normalizer: NormalizerConfig = DEFAULT_NORMALIZER,
) -> FinetuneResult:
    """Fine-tune a 3-class stance model, optionally transferring every
    non-head parameter from a pretrained checkpoint."""
    cfg = cfg.validate().resolved("target")
    model_cfg = replace(model_cfg, num_classes=3).validate()
    train_ids = {s.id for s in train_samples}
    overlap = train_ids & {s.id for s in test_samples}
    if overlap:
        raise DataError(f"train and test share ids: {sorted(overlap)[:5]}")

    if checkpoint is None:
        model = build_model(model_cfg, cfg.seed)
    else:
        ckpt_model = load_checkpoint(checkpoint) if isinstance(checkpoint, str) else checkpoint
        _check_architecture(ckpt_model, model_cfg)
        model = swap_head(ckpt_model, 3, cfg.seed)

    if val_samples is None:
        train_part, val_part = ratio_split(list(train_samples), 0.8, cfg.seed)
    else:
        train_part, val_part = list(train_samples), list(val_samples)

    def prepared(samples):
        return encode_samples(samples, vocab, model_cfg.max_len, normalizer), stance_label_indices(samples)

    fitted, history = train(model, prepared(train_part), prepared(val_part), cfg)

    encoded_test = encode_samples(test_samples, vocab, model_cfg.max_len, normalizer)
    preds = predict_classes(fitted, encoded_test)
    records = [
        PredictionRecord(id=s.id, text=s.text, gold=s.label, predicted=STANCE_CLASSES[p])
        for s, p in zip(test_samples, preds)
    ]
    return FinetuneResult(eval=EvalResult.from_records(records), model=fitted, history=history)


@dataclass
class ExperimentSpec:
    task: str  # in_domain | cross_target
    data: str
    target: str
    sarcasm: str | None = None
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    model: dict = field(default_factory=dict)  # ModelConfig overrides
    train: TrainConfig = field(default_factory=TrainConfig)
    vocab_max_size: int = 20000
    vocab_min_count: int = 1

    def validate(self) -> "ExperimentSpec":
        if self.task not in ("in_domain", "cross_target"):
            raise UsageError(f"unknown task {self.task!r}")
        if not self.seeds:
            raise UsageError("seeds must be non-empty")
        for key in ("vocab_size", "num_classes"):
            if key in self.model:
                raise UsageError(f"model override {key!r} is pipeline-owned")
        return self


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    per_seed: list[tuple[int, float]]
    mean: float
    stdev: float
    evals: list[EvalResult]
    pretrain_val_accuracies: list[list[float]] = field(default_factory=list)


def _experiment_data(spec: ExperimentSpec) -> tuple[StanceDataset, list[LabeledText], list[LabeledText]]:
    ds = load_stance_dataset(spec.data)
    if spec.task == "cross_target":
        split = assemble_cross_target(ds, spec.target)
        return ds, split.train, split.test
    if spec.target not in ds.targets:
        raise DataError(f"unknown target {spec.target!r} (have {list(ds.targets)})")
    return ds, list(ds.samples(spec.target, "train")), list(ds.samples(spec.target, "test"))


def build_experiment_vocab(
    spec: ExperimentSpec,
    train_samples: Sequence[LabeledText],
    sarcasm_ds: SarcasmDataset | None,
    normalizer: NormalizerConfig = DEFAULT_NORMALIZER,
) -> Vocab:
    """Vocabulary over the sarcasm corpus plus the stance training texts;
    test texts never contribute."""
    texts = [normalize(s.text, normalizer) for s in train_samples]
    if sarcasm_ds is not None:
        texts.extend(normalize(s.text, normalizer) for s in sarcasm_ds.samples)
    return build_vocab(texts, max_size=spec.vocab_max_size, min_count=spec.vocab_min_count)


def run_experiment(
    spec: ExperimentSpec,
    normalizer: NormalizerConfig = DEFAULT_NORMALIZER,
    flag_sarcasm: bool = False,
) -> ExperimentResult:
    """Full pipeline per seed (optional pretraining, transfer, fine-tune,
    evaluate) with macro-F1 aggregated across seeds.

    With `flag_sarcasm`, each eval's records carry the intermediate model's
    sarcasm prediction for the test texts (the stance data has no sarcasm
    gold labels)."""
    spec = spec.validate()
    _, train_samples, test_samples = _experiment_data(spec)
    sarcasm_ds = load_sarcasm_dataset(spec.sarcasm) if spec.sarcasm else None
    vocab = build_experiment_vocab(spec, train_samples, sarcasm_ds, normalizer)
    model_cfg = ModelConfig(vocab_size=len(vocab), num_classes=3, **spec.model)

    per_seed: list[tuple[int, float]] = []
    evals: list[EvalResult] = []
    pretrain_accs: list[list[float]] = []
    for seed in spec.seeds:
        cfg = replace(spec.train, seed=seed)
        ckpt = None
        sarcasm_model = None
        if sarcasm_ds is not None:
            pre = pretrain_intermediate(sarcasm_ds, vocab, model_cfg, cfg, normalizer=normalizer)
            ckpt = pre.model
            sarcasm_model = pre.model
            pretrain_accs.append(pre.val_accuracies)
        result = finetune_target(
            ckpt, train_samples, None, test_samples, vocab, model_cfg, cfg, normalizer=normalizer
        )
        if flag_sarcasm and sarcasm_model is not None:
            encoded = encode_samples(test_samples, vocab, model_cfg.max_len, normalizer)
            flags = predict_classes(sarcasm_model, encoded) == 1  # SARCASM_CLASSES[1] = Sarcastic
            for record, flag in zip(result.eval.records, flags):
                record.sarcastic_flag = bool(flag)
        per_seed.append((seed, result.eval.macro_f1_fa))
        evals.append(result.eval)

    scores = [s for _, s in per_seed]
    mean = sum(scores) / len(scores)
    stdev = math.sqrt(sum((s - mean) ** 2 for s in scores) / len(scores))
    return ExperimentResult(
        spec=spec, per_seed=per_seed, mean=mean, stdev=stdev, evals=evals,
        pretrain_val_accuracies=pretrain_accs,
    )


# Ablation variants: name -> (conv_layers, use_bilstm, needs sarcasm pretraining)
ABLATION_VARIANTS: dict[str, tuple[int, bool, bool]] = {}
for _pre in (False, True):
    for _conv in (False, True):
        for _lstm in (False, True):
            _name = "encoder" + ("+conv" if _conv else "") + ("+bilstm" if _lstm else "")
            ABLATION_VARIANTS[("sarc+" if _pre else "") + _name] = (2 if _conv else 0, _lstm, _pre)

# Row order mirroring the paper's ablation table.
TABLE_ABLATION_ROWS = [
    "encoder",
    "encoder+conv+bilstm",
    "sarc+encoder",
    "sarc+encoder+conv",
    "sarc+encoder+bilstm",
    "sarc+encoder+conv+bilstm",
]


@dataclass
class ResultTable:
    title: str
    columns: list[str]  # first column is the row label
    rows: list[list[str]]

    def to_tsv(self) -> str:
        lines = ["\t".join(self.columns)]
        lines.extend("\t".join(row) for row in self.rows)
        return "\n".join(lines) + "\n"


@dataclass
class AblationResult:
    variants: list[str]
    targets: list[str]
    cells: dict[tuple[str, str], float]  # (variant, target) -> mean macro-F1
    raw_rows: list[tuple[str, str, int, float]]  # variant, target, seed, score

    def table(self, title: str = "ablation") -> ResultTable:
        columns = ["variant"] + self.targets + ["Avg"]
        rows = []
        for variant in self.variants:
            scores = [self.cells[(variant, t)] for t in self.targets]
            avg = sum(scores) / len(scores)
            rows.append([variant] + [f"{s:.3f}" for s in scores] + [f"{avg:.3f}"])
        return ResultTable(title=title, columns=columns, rows=rows)


def run_ablation(
    data: str,
    sarcasm: str | None,
    grid: Sequence[str] = tuple(TABLE_ABLATION_ROWS),
    task: str = "in_domain",
    targets: Sequence[str] | None = None,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    train_cfg: TrainConfig | None = None,
    model_overrides: Mapping | None = None,
    normalizer: NormalizerConfig = DEFAULT_NORMALIZER,
) -> AblationResult:
    """One aggregated score per (variant, target); rows keep grid order."""
    for name in grid:
        if name not in ABLATION_VARIANTS:
            raise UsageError(f"unknown ablation variant {name!r}")
    ds = load_stance_dataset(data)
    target_list = list(targets) if targets else list(ds.targets)
    cells: dict[tuple[str, str], float] = {}
    raw: list[tuple[str, str, int, float]] = []
    for name in grid:
        conv_layers, use_bilstm, pretrain = ABLATION_VARIANTS[name]
        if pretrain and sarcasm is None:
            raise UsageError(f"variant {name!r} needs a sarcasm dataset")
        overrides = dict(model_overrides or {})
        overrides.update(conv_layers=conv_layers, use_bilstm=use_bilstm)
        for target in target_list:
            spec = ExperimentSpec(
                task=task,
                data=data,
                target=target,
                sarcasm=sarcasm if pretrain else None,
                seeds=tuple(seeds),
                model=overrides,
                train=train_cfg or TrainConfig(),
            )
            result = run_experiment(spec, normalizer=normalizer)
            cells[(name, target)] = result.mean
            raw.extend((name, target, seed, score) for seed, score in result.per_seed)
    return AblationResult(variants=list(grid), targets=target_list, cells=cells, raw_rows=raw)


def results_to_tsv(raw_rows: Sequence[tuple[str, str, int, float]]) -> str:
    """Per-seed rows then an aggregate block, both TSV."""
    lines = ["variant\ttarget\tseed\tmacro_f1"]
    for variant, target, seed, score in raw_rows:
        lines.append(f"{variant}\t{target}\t{seed}\t{score:.12g}")
    lines.append("")
    lines.append("#aggregate")
    lines.append("variant\ttarget\tmean\tstdev")
    groups: dict[tuple[str, str], list[float]] = {}
    order: list[tuple[str, str]] = []
    for variant, target, _, score in raw_rows:
        key = (variant, target)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(score)
    for variant, target in order:
        scores = groups[(variant, target)]
        mean = sum(scores) / len(scores)
        stdev = math.sqrt(sum((s - mean) ** 2 for s in scores) / len(scores))
        lines.append(f"{variant}\t{target}\t{mean:.12g}\t{stdev:.12g}")
    return "\n".join(lines) + "\n"


def _experiment_grid(
    data: str,
    sarcasm: str | None,
    task: str,
    seeds: Sequence[int],
    train_cfg: TrainConfig,
    model_overrides: Mapping,
    normalizer: NormalizerConfig,
) -> tuple[list[str], dict[str, float]]:
    ds = load_stance_dataset(data)
    scores = {}
    for target in ds.targets:
        spec = ExperimentSpec(
            task=task, data=data, target=target, sarcasm=sarcasm,
            seeds=tuple(seeds), model=dict(model_overrides), train=train_cfg,
        )
        scores[target] = run_experiment(spec, normalizer=normalizer).mean
    return list(ds.targets), scores


def _grid_table(title: str, targets: list[str], rows: list[tuple[str, dict[str, float]]]) -> ResultTable:
    columns = ["model"] + targets + ["Avg"]
    formatted = []
    for label, scores in rows:
        vals = [scores[t] for t in targets]
        avg = sum(vals) / len(vals)
        formatted.append([label] + [f"{v:.3f}" for v in vals] + [f"{avg:.3f}"])
    return ResultTable(title=title, columns=columns, rows=formatted)


def table_in_domain_no_pretraining(data, seeds=(0, 1, 2, 3, 4), train_cfg=None, model_overrides=None,
                                   normalizer=DEFAULT_NORMALIZER) -> ResultTable:
    """In-domain scores without sarcasm pretraining (one row: our model)."""
    targets, scores = _experiment_grid(data, None, "in_domain", seeds,
                                       train_cfg or TrainConfig(), model_overrides or {}, normalizer)
    return _grid_table("in_domain_no_pretraining", targets, [("encoder+conv+bilstm", scores)])


def table_with_pretraining(data, sarcasm_by_name: Mapping[str, str], seeds=(0, 1, 2, 3, 4),
                           train_cfg=None, model_overrides=None, normalizer=DEFAULT_NORMALIZER) -> ResultTable:
    """In-domain scores with pretraining, one row per sarcasm dataset."""
    rows = []
    targets: list[str] = []
    for name, sarcasm in sarcasm_by_name.items():
        targets, scores = _experiment_grid(data, sarcasm, "in_domain", seeds,
                                           train_cfg or TrainConfig(), model_overrides or {}, normalizer)
        rows.append((name, scores))
    return _grid_table("in_domain_with_pretraining", targets, rows)


def table_cross_target(data, sarcasm, seeds=(0, 1, 2, 3, 4), train_cfg=None, model_overrides=None,
                       normalizer=DEFAULT_NORMALIZER) -> ResultTable:
    """Cross-target scores with sarcasm pretraining (one row: our model)."""
    targets, scores = _experiment_grid(data, sarcasm, "cross_target", seeds,
                                       train_cfg or TrainConfig(), model_overrides or {}, normalizer)
    return _grid_table("cross_target_with_pretraining", targets, [("encoder+conv+bilstm", scores)])


def table_ablation(data, sarcasm, seeds=(0, 1, 2, 3, 4), train_cfg=None, model_overrides=None,
                   normalizer=DEFAULT_NORMALIZER) -> ResultTable:
    result = run_ablation(data, sarcasm, TABLE_ABLATION_ROWS, "in_domain", None, seeds,
                          train_cfg, model_overrides, normalizer)
    table = result.table("ablation")
    table.columns[0] = "model"
    return table


_SPEC_KEYS = {"task", "data", "target", "sarcasm", "seeds", "vocab_max_size", "vocab_min_count"}
_MODEL_KEYS = {f.name for f in fields(ModelConfig)} - {"vocab_size", "num_classes"}
_TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {"seed"}

_MODEL_TYPES = {f.name: f.type for f in fields(ModelConfig)}
_TRAIN_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def _coerce(value: str, type_name: str):
    if type_name == "int":
        return int(value)
    if type_name in ("float", "float | None"):
        return float(value)
    if type_name == "bool":
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"expected a boolean, got {value!r}")
    return value


def parse_spec_file(path: str) -> dict[str, str]:
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    raw: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("\t")
            if not sep:
                raise DataError(f"{path}:{ln}: expected key<TAB>value")
            raw[key] = value
    return raw


def build_experiment_spec(raw: Mapping[str, str]) -> ExperimentSpec:
    """Assemble an ExperimentSpec from flat key/value config; keys mirror the
    ExperimentSpec / ModelConfig / TrainConfig field names."""
    spec_kwargs: dict = {}
    model: dict = {}
    train_kwargs: dict = {}
    for key, value in raw.items():
        if key == "seeds":
            spec_kwargs["seeds"] = tuple(int(v) for v in value.split(",") if v != "")
        elif key in ("vocab_max_size", "vocab_min_count"):
            spec_kwargs[key] = int(value)
        elif key in _SPEC_KEYS:
            spec_kwargs[key] = value
        elif key in _MODEL_KEYS:
            model[key] = _coerce(value, _MODEL_TYPES[key])
        elif key in _TRAIN_KEYS:
            train_kwargs[key] = _coerce(value, _TRAIN_TYPES[key])
        else:
            raise UsageError(f"unknown config key {key!r}")
    for required in ("task", "data", "target"):
        if required not in spec_kwargs:
            raise UsageError(f"config is missing required key {required!r}")
    return ExperimentSpec(
        model=model, train=TrainConfig(**train_kwargs).validate(), **spec_kwargs
    ).validate()
