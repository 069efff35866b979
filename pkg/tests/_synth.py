"""Synthetic corpora for pipeline tests.

The stance task keys each class to a marker token (great/awful/facts). A
sarcasm marker ("kidding") flips the surface stance of a fraction of the
Against samples: those read like InFavor texts (surface marker "great"
first) with the sarcasm marker trailing later, and gold label Against.

The reversed order ("kidding ... great") appears in benign InFavor texts,
so marker *presence* separates nothing: only marker order does, across a
6-8 token range that exceeds the conv receptive field. That order rule is
exactly what the sarcasm pretraining set teaches (sarcastic = positive
marker before sarcasm marker; non-sarcastic = the reverse order or a single
marker), which makes the intermediate task transferable and hard to relearn
from scratch in a short run.
"""

from __future__ import annotations

import numpy as np

from stancelab.datasets import (
    LabeledText,
    SarcasmLabel,
    StanceLabel,
    write_sarcasm_tsv,
    write_stance_tsv,
)

FILLERS = [f"f{i}" for i in range(100)]
POSITIVE, NEGATIVE, NEUTRAL = "great", "awful", "facts"
# The sarcasm cue is a family of surface forms, each too rare in the stance
# training data to learn cold but well covered by the sarcasm corpus.
SARCASM_MARKS = [f"k{i}" for i in range(10)]
_LEN = (10, 12)
_GAP = (6, 8)


def _filler_tokens(rng, n: int) -> list[str]:
    return [str(t) for t in rng.choice(FILLERS, size=n)]


def _sarcasm_mark(rng) -> str:
    return str(rng.choice(SARCASM_MARKS))


def _single(rng, marker: str) -> str:
    tokens = _filler_tokens(rng, int(rng.integers(_LEN[0], _LEN[1] + 1)))
    tokens[int(rng.integers(0, len(tokens)))] = marker
    return " ".join(tokens)


def _pair(rng, first: str, second: str) -> str:
    """`first` strictly before `second`, separated beyond the conv window."""
    n = int(rng.integers(_LEN[0], _LEN[1] + 1))
    tokens = _filler_tokens(rng, n)
    gap = int(rng.integers(_GAP[0], min(_GAP[1], n - 2) + 1))
    a = int(rng.integers(0, n - gap))
    tokens[a] = first
    tokens[a + gap] = second
    return " ".join(tokens)


def make_stance_corpus(
    n_train: int = 2000,
    n_test: int = 500,
    flip_fraction: float = 0.3,
    benign_marker_fraction: float = 0.2,
    seed: int = 99,
    target: str = "widgets",
):
    """Returns (samples [(LabeledText, split)], flipped test ids)."""
    rng = np.random.default_rng(seed)
    samples = []
    flipped_test_ids = set()
    counter = 0

    def add(split, n):
        nonlocal counter
        for i in range(n):
            counter += 1
            sid = f"s{counter:06d}"
            cls = i % 3
            if cls == 0:  # InFavor; the benign slice has the reversed marker pair
                if rng.random() < benign_marker_fraction:
                    text = _pair(rng, _sarcasm_mark(rng), POSITIVE)
                else:
                    text = _single(rng, POSITIVE)
                label = StanceLabel.INFAVOR
            elif cls == 1:
                if rng.random() < flip_fraction:  # sarcastic: positive surface, Against gold
                    text = _pair(rng, POSITIVE, _sarcasm_mark(rng))
                    if split == "test":
                        flipped_test_ids.add(sid)
                else:
                    text = _single(rng, NEGATIVE)
                label = StanceLabel.AGAINST
            else:
                if rng.random() < benign_marker_fraction:
                    mark = _sarcasm_mark(rng)
                    order = [NEUTRAL, mark] if rng.random() < 0.5 else [mark, NEUTRAL]
                    text = _pair(rng, *order)
                else:
                    text = _single(rng, NEUTRAL)
                label = StanceLabel.NONE
            samples.append((LabeledText(id=sid, target=target, text=text, label=label), split))

    add("train", n_train)
    add("test", n_test)
    return samples, flipped_test_ids


def make_sarcasm_corpus(n: int = 800, seed: int = 7):
    """Balanced binary set teaching the order rule: sarcastic = positive marker
    then sarcasm marker; non-sarcastic = reversed pair or one marker alone."""
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        sid = f"q{i:06d}"
        if i % 2 == 0:
            text = _pair(rng, POSITIVE, _sarcasm_mark(rng))
            label = SarcasmLabel.SARCASTIC
        else:
            flavor = i % 3
            if flavor == 0:
                text = _pair(rng, _sarcasm_mark(rng), POSITIVE)
            elif flavor == 1:
                text = _single(rng, POSITIVE)
            else:
                text = _single(rng, _sarcasm_mark(rng))
            label = SarcasmLabel.NOT_SARCASTIC
        samples.append(LabeledText(id=sid, target=None, text=text, label=label))
    return samples


def make_binary_imbalanced(n: int = 500, minority_fraction: float = 0.1,
                           marker_recall: float = 0.8, marker_noise: float = 0.1, seed: int = 5):
    """9:1 binary sarcasm-format set where the minority marker is noisy, so the
    class prior matters and class weighting has something to fix."""
    rng = np.random.default_rng(seed)
    samples = []
    n_minority = int(round(n * minority_fraction))
    for i in range(n):
        sid = f"b{i:06d}"
        minority = i < n_minority
        hit = rng.random() < (marker_recall if minority else marker_noise)
        text = _single(rng, _sarcasm_mark(rng)) if hit else " ".join(_filler_tokens(rng, 8))
        label = SarcasmLabel.SARCASTIC if minority else SarcasmLabel.NOT_SARCASTIC
        samples.append(LabeledText(id=sid, target=None, text=text, label=label))
    return samples


def write_stance_corpus(path, **kwargs):
    samples, flipped = make_stance_corpus(**kwargs)
    write_stance_tsv(path, samples)
    return flipped


def write_sarcasm_corpus(path, **kwargs):
    write_sarcasm_tsv(path, make_sarcasm_corpus(**kwargs))
