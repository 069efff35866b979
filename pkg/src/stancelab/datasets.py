"""Dataset loading, validation and split construction.

Stance files are UTF-8 TSV with a header line and columns
``id<TAB>target<TAB>text<TAB>label`` (an optional ``split`` column with
values train|test assigns partitions; rows without it land in train).
Sarcasm files use ``id<TAB>text<TAB>label``. Literal tabs/newlines inside
text are escaped as ``\\t`` / ``\\n`` (and backslash as ``\\\\`` so the
escaping is reversible).
"""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import DataError


class StanceLabel(Enum):
    INFAVOR = "InFavor"
    AGAINST = "Against"
    NONE = "None"

    @classmethod
    def parse(cls, token: str) -> "StanceLabel":
        t = token.strip().lower()
        if t in ("favor", "infavor"):
            return cls.INFAVOR
        if t == "against":
            return cls.AGAINST
        if t == "none":
            return cls.NONE
        raise ValueError(f"unknown stance label {token!r}")


class SarcasmLabel(Enum):
    SARCASTIC = "Sarcastic"
    NOT_SARCASTIC = "NotSarcastic"

    @classmethod
    def parse(cls, token: str) -> "SarcasmLabel":
        t = token.strip().lower()
        if t == "sarcastic":
            return cls.SARCASTIC
        if t == "not_sarcastic":
            return cls.NOT_SARCASTIC
        raise ValueError(f"unknown sarcasm label {token!r}")


# Canonical class order used by confusion matrices and model heads.
STANCE_CLASSES = (StanceLabel.INFAVOR, StanceLabel.AGAINST, StanceLabel.NONE)
SARCASM_CLASSES = (SarcasmLabel.NOT_SARCASTIC, SarcasmLabel.SARCASTIC)


@dataclass
class LabeledText:
    """One sample: raw text plus its target (None for sarcasm data) and label."""

    id: str
    target: str | None
    text: str
    label: StanceLabel | SarcasmLabel


@dataclass
class StanceDataset:
    name: str
    targets: tuple[str, ...]
    partitions: dict[tuple[str, str], list[LabeledText]]
    dropped_rows: int = 0

    def samples(self, target: str, split: str) -> list[LabeledText]:
        return self.partitions.get((target, split), [])

    def counts(self, target: str, split: str) -> dict[StanceLabel, int]:
        c = Counter(s.label for s in self.samples(target, split))
        return {label: c.get(label, 0) for label in STANCE_CLASSES}

    def all_samples(self) -> list[LabeledText]:
        out = []
        for target in self.targets:
            for split in ("train", "test"):
                out.extend(self.samples(target, split))
        return out


@dataclass
class SarcasmDataset:
    name: str
    samples: list[LabeledText]
    dropped_rows: int = 0

    def counts(self) -> dict[SarcasmLabel, int]:
        c = Counter(s.label for s in self.samples)
        return {label: c.get(label, 0) for label in SARCASM_CLASSES}


@dataclass
class CrossTargetSplit:
    """Leave-one-out assembly: sources' train+test pooled, destination test held out."""

    destination: str
    train: list[LabeledText]
    test: list[LabeledText]


@dataclass(frozen=True)
class ClassWeights:
    weights: Mapping[object, float]

    def __getitem__(self, label) -> float:
        return self.weights[label]

    def as_array(self, label_order: Sequence) -> np.ndarray:
        return np.array([self.weights[lab] for lab in label_order], dtype=np.float64)


def escape_text(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def unescape_text(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            if nxt == "t":
                out.append("\t")
                i += 2
                continue
            if nxt == "n":
                out.append("\n")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def _read_rows(path: str) -> tuple[list[str], list[tuple[int, list[str]]]]:
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataError(f"empty dataset: {path}")
    header = lines[0].split("\t")
    rows = [(ln, line.split("\t")) for ln, line in enumerate(lines[1:], start=2)]
    return header, rows


def _column_index(header: list[str], name: str, path: str) -> int:
    try:
        return header.index(name)
    except ValueError:
        raise DataError(f"{path}: missing column {name!r} in header") from None


def load_stance_dataset(
    path: str,
    schema: Mapping[str, str] | None = None,
    name: str | None = None,
) -> StanceDataset:
    """Load a stance TSV into per-(target, split) partitions.

    ``schema`` maps the canonical column names (id, target, text, label,
    split) to the file's header names; unmapped names are used verbatim.
    Rows whose text is empty after trimming are dropped and counted in
    ``dropped_rows``.
    """
    colmap = {"id": "id", "target": "target", "text": "text", "label": "label", "split": "split"}
    if schema:
        colmap.update(schema)
    header, rows = _read_rows(path)
    idx = {key: _column_index(header, colmap[key], path) for key in ("id", "target", "text", "label")}
    split_idx = header.index(colmap["split"]) if colmap["split"] in header else None
    ncols = len(header)

    targets: list[str] = []
    partitions: dict[tuple[str, str], list[LabeledText]] = {}
    seen_ids: set[str] = set()
    dropped = 0
    for ln, fields in rows:
        if len(fields) != ncols:
            raise DataError(f"{path}:{ln}: expected {ncols} columns, found {len(fields)}")
        text = unescape_text(fields[idx["text"]])
        if not text.strip():
            dropped += 1
            continue
        try:
            label = StanceLabel.parse(fields[idx["label"]])
        except ValueError as exc:
            raise DataError(f"{path}:{ln}: {exc}") from None
        sample_id = fields[idx["id"]]
        if sample_id in seen_ids:
            raise DataError(f"{path}:{ln}: duplicate id {sample_id!r}")
        seen_ids.add(sample_id)
        target = fields[idx["target"]]
        split = "train"
        if split_idx is not None:
            split = fields[split_idx].strip().lower()
            if split not in ("train", "test"):
                raise DataError(f"{path}:{ln}: unknown split {fields[split_idx]!r}")
        if target not in targets:
            targets.append(target)
        partitions.setdefault((target, split), []).append(
            LabeledText(id=sample_id, target=target, text=text, label=label)
        )
    if not partitions:
        raise DataError(f"empty dataset: {path}")
    return StanceDataset(
        name=name or os.path.splitext(os.path.basename(path))[0],
        targets=tuple(targets),
        partitions=partitions,
        dropped_rows=dropped,
    )


def load_sarcasm_dataset(path: str, name: str | None = None) -> SarcasmDataset:
    header, rows = _read_rows(path)
    idx = {key: _column_index(header, key, path) for key in ("id", "text", "label")}
    ncols = len(header)
    samples: list[LabeledText] = []
    seen_ids: set[str] = set()
    dropped = 0
    for ln, fields in rows:
        if len(fields) != ncols:
            raise DataError(f"{path}:{ln}: expected {ncols} columns, found {len(fields)}")
        text = unescape_text(fields[idx["text"]])
        if not text.strip():
            dropped += 1
            continue
        try:
            label = SarcasmLabel.parse(fields[idx["label"]])
        except ValueError as exc:
            raise DataError(f"{path}:{ln}: {exc}") from None
        sample_id = fields[idx["id"]]
        if sample_id in seen_ids:
            raise DataError(f"{path}:{ln}: duplicate id {sample_id!r}")
        seen_ids.add(sample_id)
        samples.append(LabeledText(id=sample_id, target=None, text=text, label=label))
    if not samples:
        raise DataError(f"empty dataset: {path}")
    return SarcasmDataset(
        name=name or os.path.splitext(os.path.basename(path))[0],
        samples=samples,
        dropped_rows=dropped,
    )


def write_stance_tsv(path: str, samples: Iterable[tuple[LabeledText, str]]) -> None:
    """Write (sample, split) pairs in the stance TSV format (inverse of the loader)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id\ttarget\ttext\tlabel\tsplit\n")
        for sample, split in samples:
            fh.write(
                f"{sample.id}\t{sample.target}\t{escape_text(sample.text)}\t"
                f"{sample.label.value.upper()}\t{split}\n"
            )


def write_sarcasm_tsv(path: str, samples: Iterable[LabeledText]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id\ttext\tlabel\n")
        for sample in samples:
            token = "SARCASTIC" if sample.label is SarcasmLabel.SARCASTIC else "NOT_SARCASTIC"
            fh.write(f"{sample.id}\t{escape_text(sample.text)}\t{token}\n")


def assemble_cross_target(ds: StanceDataset, destination: str) -> CrossTargetSplit:
    """Pool every other target's train and test partitions as the training set.

    The destination's test partition is returned untouched; its train
    partition is excluded entirely (zero-shot fine-tuning).
    """
    if destination not in ds.targets:
        raise DataError(f"unknown destination target {destination!r} (have {list(ds.targets)})")
    if len(ds.targets) < 2:
        raise DataError("cross-target assembly needs at least two targets")
    train: list[LabeledText] = []
    for target in ds.targets:
        if target == destination:
            continue
        train.extend(ds.samples(target, "train"))
        train.extend(ds.samples(target, "test"))
    return CrossTargetSplit(destination=destination, train=train, test=list(ds.samples(destination, "test")))


def kfold(samples: Sequence, k: int, seed: int) -> list[list]:
    """Split into k folds of near-equal size (shuffle then deal round-robin)."""
    n = len(samples)
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds sample count {n}")
    order = np.random.default_rng(seed).permutation(n)
    folds: list[list] = [[] for _ in range(k)]
    for pos, idx in enumerate(order):
        folds[pos % k].append(samples[idx])
    return folds


def _label_of(sample):
    return getattr(sample, "label", None)


def ratio_split(samples: Sequence, train_fraction: float, seed: int) -> tuple[list, list]:
    """Stratified train/validation split with |train| = round(fraction * n).

    Per-class quotas use largest-remainder allocation so the total matches
    the rounding rule exactly even when per-class rounding would not.
    """
    n = len(samples)
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    total_train = int(np.floor(train_fraction * n + 0.5))

    groups: dict[str, list[int]] = {}
    for i, sample in enumerate(samples):
        groups.setdefault(repr(_label_of(sample)), []).append(i)
    keys = sorted(groups)
    quotas = {key: train_fraction * len(groups[key]) for key in keys}
    alloc = {key: int(np.floor(quotas[key])) for key in keys}
    leftover = total_train - sum(alloc.values())
    # Hand the remaining slots to the largest fractional remainders.
    by_remainder = sorted(keys, key=lambda key: (-(quotas[key] - alloc[key]), -len(groups[key]), key))
    for key in by_remainder[:leftover]:
        alloc[key] += 1

    rng = np.random.default_rng(seed)
    train: list = []
    val: list = []
    for key in keys:
        idxs = groups[key]
        order = rng.permutation(len(idxs))
        take = alloc[key]
        train.extend(samples[idxs[j]] for j in order[:take])
        val.extend(samples[idxs[j]] for j in order[take:])
    return train, val


def class_weights(counts: Mapping[object, int]) -> ClassWeights:
    """Balanced inverse-frequency weights w_c = N / (C * n_c)."""
    if not counts:
        raise ValueError("no classes given")
    for label, count in counts.items():
        if count <= 0:
            raise ValueError(f"empty class: {label}")
    total = sum(counts.values())
    c = len(counts)
    return ClassWeights({label: total / (c * n) for label, n in counts.items()})
