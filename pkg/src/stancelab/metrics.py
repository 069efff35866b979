"""Evaluation: confusion matrices, the Favor/Against macro F1, failure
listings, sarcasm recovery rate, and target similarity analysis."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .datasets import STANCE_CLASSES, StanceLabel


@dataclass
class ConfusionMatrix:
    """Rows are gold classes, columns predictions, in a fixed class order."""

    counts: np.ndarray
    labels: tuple = STANCE_CLASSES

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        c = len(self.labels)
        if self.counts.shape != (c, c):
            raise ValueError(f"confusion matrix shape {self.counts.shape} does not match {c} labels")

    def total(self) -> int:
        return int(self.counts.sum())


def confusion(preds: Sequence, golds: Sequence, labels: tuple = STANCE_CLASSES) -> ConfusionMatrix:
    """Count (gold, predicted) pairs; entries may be labels or class indices."""
    if len(preds) != len(golds):
        raise ValueError(f"length mismatch: {len(preds)} predictions vs {len(golds)} golds")
    if not preds:
        raise ValueError("empty inputs")
    index = {label: i for i, label in enumerate(labels)}
    index.update({i: i for i in range(len(labels))})
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for pred, gold in zip(preds, golds):
        try:
            counts[index[gold], index[pred]] += 1
        except KeyError as exc:
            raise ValueError(f"label {exc.args[0]!r} outside the class set") from None
    return ConfusionMatrix(counts=counts, labels=labels)


def _precision_recall_f1(cm: np.ndarray, idx: int) -> tuple[float, float, float]:
    tp = float(cm[idx, idx])
    fp = float(cm[:, idx].sum() - cm[idx, idx])
    fn = float(cm[idx, :].sum() - cm[idx, idx])
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def per_class_f1(cm: ConfusionMatrix) -> dict:
    return {label: _precision_recall_f1(cm.counts, i)[2] for i, label in enumerate(cm.labels)}


def macro_f1_favor_against(cm: ConfusionMatrix) -> float:
    """Mean of the InFavor and Against F1 scores. The None class is excluded
    from the average but still moves the score through false positives and
    false negatives of the scored classes."""
    if cm.counts.shape != (3, 3):
        raise ValueError(f"need a 3x3 stance confusion matrix, got {cm.counts.shape}")
    f1_favor = _precision_recall_f1(cm.counts, 0)[2]
    f1_against = _precision_recall_f1(cm.counts, 1)[2]
    return (f1_favor + f1_against) / 2.0


@dataclass
class PredictionRecord:
    id: str
    text: str
    gold: StanceLabel
    predicted: StanceLabel
    sarcastic_flag: bool | None = None


@dataclass
class EvalResult:
    confusion: ConfusionMatrix
    per_class_f1: Mapping
    macro_f1_fa: float
    records: list[PredictionRecord] = field(default_factory=list)

    @classmethod
    def from_records(cls, records: Sequence[PredictionRecord]) -> "EvalResult":
        cm = confusion([r.predicted for r in records], [r.gold for r in records])
        return cls(
            confusion=cm,
            per_class_f1=per_class_f1(cm),
            macro_f1_fa=macro_f1_favor_against(cm),
            records=list(records),
        )


def failure_report(result: EvalResult) -> list[PredictionRecord]:
    """Misclassified records sorted by (gold, predicted, id)."""
    order = {label: i for i, label in enumerate(result.confusion.labels)}
    wrong = [r for r in result.records if r.gold != r.predicted]
    return sorted(wrong, key=lambda r: (order[r.gold], order[r.predicted], r.id))


def sarcasm_recovery(
    base: EvalResult, transfer: EvalResult, flags: Mapping[str, bool]
) -> float:
    """Among samples the base run misclassified that are flagged sarcastic,
    the fraction the transfer run classifies correctly."""
    base_by_id = {r.id: r for r in base.records}
    transfer_by_id = {r.id: r for r in transfer.records}
    if set(base_by_id) != set(transfer_by_id):
        raise ValueError("base and transfer results cover different sample ids")
    missing = [i for i in base_by_id if i not in flags]
    if missing:
        raise ValueError(f"sarcastic flags missing for ids: {sorted(missing)[:5]}")
    denom = [i for i, r in base_by_id.items() if r.gold != r.predicted and flags[i]]
    if not denom:
        raise ValueError("no misclassified sarcastic samples; recovery rate undefined")
    fixed = sum(1 for i in denom if transfer_by_id[i].gold == transfer_by_id[i].predicted)
    return fixed / len(denom)


@dataclass
class SimilarityReport:
    targets: list[str]
    mean_vectors: np.ndarray  # [T, d]
    cosine: np.ndarray  # [T, T]
    scores: dict[str, float]  # per-target mean cosine against the other targets


def target_similarity(groups: Sequence[tuple[str, np.ndarray]]) -> SimilarityReport:
    """Cosine similarity between per-target mean vectors; each target's score
    is its mean similarity to every other target."""
    if len(groups) < 2:
        raise ValueError("need at least two targets")
    targets = [t for t, _ in groups]
    dims = {np.asarray(v).shape[1] for _, v in groups}
    if len(dims) != 1:
        raise ValueError(f"vector dimensions differ across targets: {sorted(dims)}")
    means = np.stack([np.asarray(v, dtype=np.float64).mean(axis=0) for _, v in groups])
    norms = np.linalg.norm(means, axis=1)
    for t, n in zip(targets, norms):
        if n == 0.0:
            raise ValueError(f"zero-norm mean vector for target {t!r}")
    unit = means / norms[:, None]
    cosine = unit @ unit.T
    np.fill_diagonal(cosine, 1.0)
    scores = {}
    for i, t in enumerate(targets):
        others = [cosine[i, j] for j in range(len(targets)) if j != i]
        scores[t] = float(np.mean(others))
    return SimilarityReport(targets=targets, mean_vectors=means, cosine=cosine, scores=scores)


def confusion_to_tsv(cm: ConfusionMatrix) -> str:
    names = [getattr(label, "value", str(label)) for label in cm.labels]
    lines = ["gold\\pred\t" + "\t".join(names)]
    for i, name in enumerate(names):
        lines.append(name + "\t" + "\t".join(str(int(v)) for v in cm.counts[i]))
    return "\n".join(lines) + "\n"


def failure_report_to_tsv(result: EvalResult) -> str:
    lines = ["id\tgold\tpredicted\tsarcastic\ttext"]
    for r in failure_report(result):
        flag = "" if r.sarcastic_flag is None else str(int(r.sarcastic_flag))
        lines.append(f"{r.id}\t{r.gold.value}\t{r.predicted.value}\t{flag}\t{r.text}")
    return "\n".join(lines) + "\n"


def similarity_to_tsv(report: SimilarityReport) -> str:
    lines = ["target\tscore"]
    for t in report.targets:
        lines.append(f"{t}\t{report.scores[t]:.6f}")
    return "\n".join(lines) + "\n"
