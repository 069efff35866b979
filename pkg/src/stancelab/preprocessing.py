"""Social-media text normalization, hashtag segmentation and sequence encoding."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import DataError

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

# Longest lexicon word the segmentation DP will consider as one piece.
MAX_PIECE_LEN = 24
# Costs are quantized to integer units so that equal-cost segmentations tie
# exactly and the stated tie-breaks (fewer pieces, then lexicographic) are
# reproducible against a brute-force enumerator.
_COST_SCALE = 1 << 24
_OOV_UNIT = round(9.999 * _COST_SCALE)

_STOPWORDS = frozenset(
    """a an and are as at be been but by for from had has have he her his i if in
    is it its me my not of on or our she so that the their them they this to was
    we were what when which who will with you your""".split()
)


class SegmentationLexicon:
    """Frequency-ranked word list driving the hashtag segmentation DP.

    Word cost follows the Zipf shape ln(rank * ln(V+1)) with rank 1 for the
    most frequent word; pieces outside the lexicon cost 9.999 per character.
    """

    def __init__(self, words: Iterable[str]):
        self._units: dict[str, int] = {}
        v = 0
        ordered = list(words)
        log_v = math.log(len(ordered) + 1) if ordered else 0.0
        prev_units = -1
        for rank, word in enumerate(ordered, start=1):
            if not word or word != word.lower() or not word.isalnum():
                raise ValueError(f"lexicon words must be lowercase alphanumeric, got {word!r}")
            if word in self._units:
                raise ValueError(f"duplicate lexicon word {word!r}")
            units = round(math.log(rank * log_v) * _COST_SCALE)
            if units <= prev_units:
                raise ValueError(f"cost not strictly increasing at rank {rank} ({word!r})")
            prev_units = units
            self._units[word] = units
            v += 1

    @classmethod
    def from_file(cls, path: str) -> "SegmentationLexicon":
        with open(path, encoding="utf-8") as fh:
            return cls(line.strip() for line in fh if line.strip())

    def __len__(self) -> int:
        return len(self._units)

    def __contains__(self, word: str) -> bool:
        return word in self._units

    def cost_units(self, piece: str) -> int:
        units = self._units.get(piece)
        if units is None:
            return _OOV_UNIT * len(piece)
        return units

    def cost(self, piece: str) -> float:
        return self.cost_units(piece) / _COST_SCALE


def segment_hashtag(tag: str, lexicon: SegmentationLexicon) -> list[str]:
    """Split hashtag content into words minimizing the total lexicon cost.

    Ties break toward fewer pieces, then lexicographically smaller piece
    lists. The concatenated output always equals the lowercased
    alphanumeric content of the input; input with no such content yields [].
    """
    if not tag:
        raise ValueError("empty hashtag")
    s = "".join(ch for ch in tag.lower() if ch.isalnum())
    if not s:
        return []
    n = len(s)
    # best[i]: (cost units, piece count, pieces) for s[:i]
    best: list[tuple[int, int, tuple[str, ...]]] = [(0, 0, ())]
    for i in range(1, n + 1):
        cand = None
        for j in range(max(0, i - MAX_PIECE_LEN), i):
            piece = s[j:i]
            prev = best[j]
            entry = (prev[0] + lexicon.cost_units(piece), prev[1] + 1, prev[2] + (piece,))
            if cand is None or entry < cand:
                cand = entry
        best.append(cand)
    return list(best[n][2])


@dataclass(frozen=True)
class NormalizerConfig:
    classical_mode: bool = False
    squeeze_len: int = 2
    url_token: str = "<url>"
    user_token: str = "<user>"
    replacements: Mapping[str, str] | None = None
    hashtag_lexicon: SegmentationLexicon | None = None


DEFAULT_NORMALIZER = NormalizerConfig()

_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_USER_RE = re.compile(r"@\w+")


def _stem(token: str) -> str:
    # Light suffix stripper, iterated to a fixed point so normalize stays
    # idempotent; quality is secondary (classical_mode only feeds non-neural
    # baselines).
    while True:
        before = token
        if token.endswith("ies") and len(token) > 4:
            token = token[:-3] + "y"
        elif token.endswith("sses"):
            token = token[:-2]
        elif token.endswith("s") and len(token) > 3 and not token.endswith(("ss", "us", "is")):
            token = token[:-1]
        elif token.endswith("ed") and len(token) > 4:
            token = token[:-2]
            if len(token) > 2 and token[-1] == token[-2]:
                token = token[:-1]
        elif token.endswith("ing") and len(token) > 5:
            token = token[:-3]
            if len(token) > 2 and token[-1] == token[-2]:
                token = token[:-1]
        if token == before:
            return token


def normalize(raw: str, rules: NormalizerConfig = DEFAULT_NORMALIZER) -> str:
    """Lowercase and canonicalize a tweet-like string.

    URLs and @mentions collapse to placeholder tokens, character runs longer
    than ``squeeze_len`` shrink to ``squeeze_len``, hashtags are segmented
    when a lexicon is configured, and an optional replacement lexicon maps
    token variants to canonical forms. Stemming and stop-word removal apply
    only in classical mode. Total and idempotent.
    """
    s = raw.lower()
    s = _URL_RE.sub(rules.url_token, s)
    s = _USER_RE.sub(rules.user_token, s)
    if rules.squeeze_len >= 1:
        n = rules.squeeze_len
        s = re.sub(r"(.)\1{%d,}" % n, lambda m: m.group(1) * n, s)
    tokens: list[str] = []
    for token in s.split():
        if token.startswith("#") and len(token) > 1 and rules.hashtag_lexicon is not None:
            tokens.extend(segment_hashtag(token[1:], rules.hashtag_lexicon) or [token])
            continue
        if rules.replacements:
            token = rules.replacements.get(token, token)
        tokens.append(token)
    if rules.classical_mode:
        tokens = [_stem(t) for t in tokens if t not in _STOPWORDS]
    return " ".join(tokens)


@dataclass(frozen=True)
class Vocab:
    """Token-to-id map with PAD=0 and UNK=1 reserved."""

    token_to_id: Mapping[str, int]

    def __len__(self) -> int:
        return len(self.token_to_id)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def id(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def tokens_in_id_order(self) -> list[str]:
        return [t for t, _ in sorted(self.token_to_id.items(), key=lambda kv: kv[1])]


def build_vocab(texts: Iterable[str], max_size: int = 20000, min_count: int = 1) -> Vocab:
    """Rank tokens by (count desc, token asc) and keep at most max_size entries
    including the two reserved ids."""
    if max_size < 2:
        raise ValueError(f"max_size must be >= 2 to fit PAD and UNK, got {max_size}")
    counts: Counter[str] = Counter()
    any_text = False
    for text in texts:
        any_text = True
        counts.update(text.split())
    if not any_text or not counts:
        raise ValueError("empty corpus")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    mapping = {PAD_TOKEN: PAD_ID, UNK_TOKEN: UNK_ID}
    for token, count in ranked:
        if count < min_count or len(mapping) >= max_size:
            break
        mapping[token] = len(mapping)
    return Vocab(mapping)


def save_vocab(vocab: Vocab, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for token in vocab.tokens_in_id_order():
            fh.write(f"{token}\t{vocab.token_to_id[token]}\n")


def load_vocab(path: str) -> Vocab:
    mapping: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                token, id_str = line.split("\t")
                mapping[token] = int(id_str)
            except ValueError:
                raise DataError(f"{path}:{ln}: bad vocab line {line!r}") from None
    ids = sorted(mapping.values())
    if ids != list(range(len(ids))) or mapping.get(PAD_TOKEN) != PAD_ID or mapping.get(UNK_TOKEN) != UNK_ID:
        raise DataError(f"{path}: vocab ids must be contiguous with {PAD_TOKEN}=0, {UNK_TOKEN}=1")
    return Vocab(mapping)


def load_replacements(path: str) -> dict[str, str]:
    """Read a variant<TAB>canonical replacement lexicon."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{ln}: expected variant<TAB>canonical")
            out[parts[0]] = parts[1]
    return out


@dataclass
class EncodedText:
    """Fixed-length id sequence; positions >= true_length are PAD."""

    ids: np.ndarray
    true_length: int

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)


def encode(text: str, vocab: Vocab, max_len: int) -> EncodedText:
    """Whitespace-tokenize (callers normalize first), map through the vocab,
    truncate to max_len and right-pad."""
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    tokens = text.split()[:max_len]
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    for i, token in enumerate(tokens):
        ids[i] = vocab.id(token)
    return EncodedText(ids=ids, true_length=len(tokens))


def decode(encoded: EncodedText, vocab: Vocab) -> list[str]:
    id_to_token = {i: t for t, i in vocab.token_to_id.items()}
    return [id_to_token[int(i)] for i in encoded.ids[: encoded.true_length]]
