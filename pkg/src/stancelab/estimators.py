"""Scikit-learn style wrappers so the classifier composes with Pipelines,
clone() and grid tooling.

``TextNormalizer`` and ``SequenceEncoder`` are transformers over lists of
strings; ``ConvBiLstmClassifier`` wraps model construction plus the training
protocol behind fit/predict/predict_proba.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from .datasets import ratio_split
from .exceptions import DataError
from .network import Model, ModelConfig, build_model, load_checkpoint, swap_head
from .network import predict_proba as _predict_proba
from .preprocessing import (
    EncodedText,
    NormalizerConfig,
    SegmentationLexicon,
    build_vocab,
    encode,
    normalize,
)
from .training import TrainConfig, train


def check_text_list(X) -> list[str]:
    """Validate a 1-d collection of strings."""
    if isinstance(X, str):
        raise ValueError("expected a list of strings, got a single string")
    out = list(X)
    for i, item in enumerate(out):
        if not isinstance(item, str):
            raise ValueError(f"X[{i}] is {type(item).__name__}, expected str")
    return out


def check_encoded_list(X, vocab_size: int | None = None) -> list[EncodedText]:
    """Validate a collection of EncodedText with one shared length."""
    out = list(X)
    if not out:
        raise ValueError("X is empty")
    lengths = {len(s.ids) for s in out if isinstance(s, EncodedText)}
    if len(lengths) != 1 or len(out) != sum(isinstance(s, EncodedText) for s in out):
        raise ValueError("X must be EncodedText samples sharing one max_len")
    if vocab_size is not None:
        top = max(int(s.ids.max()) for s in out)
        if top >= vocab_size:
            raise ValueError(f"id {top} out of range for vocab of size {vocab_size}")
    return out


class TextNormalizer(TransformerMixin, BaseEstimator):
    """Stateless normalization transform (lowercase, URL/user tokens, run
    squeezing, optional hashtag segmentation)."""

    def __init__(self, classical_mode=False, squeeze_len=2, url_token="<url>",
                 user_token="<user>", replacements=None, hashtag_lexicon=None):
        self.classical_mode = classical_mode
        self.squeeze_len = squeeze_len
        self.url_token = url_token
        self.user_token = user_token
        self.replacements = replacements
        self.hashtag_lexicon = hashtag_lexicon

    def _rules(self) -> NormalizerConfig:
        lexicon = self.hashtag_lexicon
        if isinstance(lexicon, (list, tuple)):
            lexicon = SegmentationLexicon(lexicon)
        return NormalizerConfig(
            classical_mode=self.classical_mode,
            squeeze_len=self.squeeze_len,
            url_token=self.url_token,
            user_token=self.user_token,
            replacements=self.replacements,
            hashtag_lexicon=lexicon,
        )

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        rules = self._rules()
        return [normalize(text, rules) for text in check_text_list(X)]


class SequenceEncoder(TransformerMixin, BaseEstimator):
    """Builds a vocabulary at fit time and encodes texts to fixed-length id
    sequences. Expects already-normalized text."""

    def __init__(self, max_len=64, max_size=20000, min_count=1):
        self.max_len = max_len
        self.max_size = max_size
        self.min_count = min_count

    def fit(self, X, y=None):
        self.vocab_ = build_vocab(check_text_list(X), max_size=self.max_size, min_count=self.min_count)
        return self

    def transform(self, X) -> list[EncodedText]:
        if not hasattr(self, "vocab_"):
            raise DataError("SequenceEncoder is not fitted")
        return [encode(text, self.vocab_, self.max_len) for text in check_text_list(X)]


class ConvBiLstmClassifier(ClassifierMixin, BaseEstimator):
    """Embedding -> Conv stack -> BiLSTM -> dense classifier trained with the
    Adam / early-stopping protocol.

    X is a list of EncodedText. ``init_model`` (a Model or checkpoint path)
    transfers every non-head parameter from a pretrained model; the head is
    always freshly initialized for the fitted label set.
    """

    def __init__(self, vocab_size=None, embed_dim=32, conv_layers=2, conv_filters=16,
                 kernel=3, use_bilstm=True, lstm_hidden=32, dropout=0.25, max_len=64,
                 dtype="f32", batch_size=16, lr_init=3e-5, lr_floor=None, max_epochs=50,
                 min_epochs=10, patience=5, use_class_weights=True,
                 validation_fraction=0.2, init_model=None, seed=0):
        self.vocab_size = vocab_size
        self.embed_dim = embed_dim
        self.conv_layers = conv_layers
        self.conv_filters = conv_filters
        self.kernel = kernel
        self.use_bilstm = use_bilstm
        self.lstm_hidden = lstm_hidden
        self.dropout = dropout
        self.max_len = max_len
        self.dtype = dtype
        self.batch_size = batch_size
        self.lr_init = lr_init
        self.lr_floor = lr_floor
        self.max_epochs = max_epochs
        self.min_epochs = min_epochs
        self.patience = patience
        self.use_class_weights = use_class_weights
        self.validation_fraction = validation_fraction
        self.init_model = init_model
        self.seed = seed

    def _model_config(self, vocab_size: int, num_classes: int) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size, num_classes=num_classes, embed_dim=self.embed_dim,
            conv_layers=self.conv_layers, conv_filters=self.conv_filters, kernel=self.kernel,
            use_bilstm=self.use_bilstm, lstm_hidden=self.lstm_hidden, dropout=self.dropout,
            max_len=self.max_len, dtype=self.dtype,
        ).validate()

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size, lr_init=self.lr_init, lr_floor=self.lr_floor,
            max_epochs=self.max_epochs, min_epochs=self.min_epochs, patience=self.patience,
            use_class_weights=self.use_class_weights, seed=self.seed,
        ).validate()

    def fit(self, X, y, X_val=None, y_val=None):
        """Fit on encoded sequences; carves a stratified validation split from
        (X, y) when none is given."""
        y = np.asarray(y)
        classes, y_idx = np.unique(y, return_inverse=True)
        if len(classes) not in (2, 3):
            raise ValueError(f"need 2 or 3 classes, got {len(classes)}")
        self.classes_ = classes

        init = self.init_model
        if isinstance(init, str):
            init = load_checkpoint(init)
        if init is not None:
            vocab_size = init.config.vocab_size
            model = swap_head(init, len(classes), self.seed)
        else:
            if self.vocab_size is None:
                raise ValueError("vocab_size is required when fitting from scratch")
            vocab_size = self.vocab_size
            model = build_model(self._model_config(vocab_size, len(classes)), self.seed)

        X = check_encoded_list(X, vocab_size)
        cfg = self._train_config()
        if X_val is None:
            # stratify by label index via a tiny shim object
            keyed = [_Keyed(enc, int(label)) for enc, label in zip(X, y_idx)]
            train_part, val_part = ratio_split(keyed, 1.0 - self.validation_fraction, self.seed)
            x_train = [k.payload for k in train_part]
            yt = np.array([k.label for k in train_part])
            x_val = [k.payload for k in val_part]
            yv = np.array([k.label for k in val_part])
        else:
            x_train, yt = X, y_idx
            x_val = check_encoded_list(X_val, vocab_size)
            yv = np.searchsorted(classes, np.asarray(y_val))

        self.model_, self.history_ = train(model, (x_train, yt), (x_val, yv), cfg)
        return self

    def predict_proba(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise DataError("classifier is not fitted")
        X = check_encoded_list(X, self.model_.config.vocab_size)
        return _predict_proba(self.model_, X)

    def predict(self, X) -> np.ndarray:
        return self.classes_[self.predict_proba(X).argmax(axis=1)]


class _Keyed:
    """Pairs a payload with a label attribute so ratio_split can stratify."""

    __slots__ = ("payload", "label")

    def __init__(self, payload, label):
        self.payload = payload
        self.label = label
