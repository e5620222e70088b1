"""Scikit-learn style estimators wrapping the encoders and the probe.

The transformers map caption lists to embedding matrices, so the probe
composes in a regular sklearn ``Pipeline``:

    Pipeline([("encode", BagOfWordsEncoder()), ("probe", RecoveryProbe())])

``fit`` then trains the probe on the encoder's frozen embeddings and
``predict`` decodes captions back out of them.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .encoders import BowEncoder, PositionalBowEncoder, Tokenizer
from .grammar import bundled_vocabulary_path, load_vocabulary
from .probe import (
    ProbeCheckpoint,
    TrainConfig,
    autoencode_train,
    decode_embeddings,
    train_probe,
)
from .textmetrics import exact_match
from .validation import check_embedding_matrix, check_paired_lengths, check_texts

__all__ = [
    "BagOfWordsEncoder",
    "PooledAutoencoder",
    "DimensionShuffler",
    "RecoveryProbe",
]


class BagOfWordsEncoder(BaseEstimator, TransformerMixin):
    """Order-invariant reference encoder (optionally position-aware)."""

    def __init__(self, dim: int = 256, seed: int = 0, positional: bool = False):
        self.dim = dim
        self.seed = seed
        self.positional = positional

    def fit(self, X, y=None):
        check_texts(X)
        cls = PositionalBowEncoder if self.positional else BowEncoder
        self.encoder_ = cls(dim=self.dim, seed=self.seed)
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "encoder_"):
            self.fit(X)
        texts = check_texts(X)
        return np.stack([self.encoder_.encode_text(t) for t in texts])


class PooledAutoencoder(BaseEstimator, TransformerMixin):
    """Trainable pooled encoder fitted autoencoder-style on raw captions."""

    def __init__(
        self,
        dim: int = 256,
        layers: int = 2,
        epochs: int = 10,
        batch_size: int = 64,
        lr: float = 1e-3,
        optimizer: str = "adam",
        seed: int = 0,
        vocabulary_path: str | None = None,
    ):
        self.dim = dim
        self.layers = layers
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.optimizer = optimizer
        self.seed = seed
        self.vocabulary_path = vocabulary_path

    def _tokenizer(self, texts: list[str]) -> Tokenizer:
        path = self.vocabulary_path or bundled_vocabulary_path()
        try:
            return Tokenizer.from_vocabulary(load_vocabulary(path))
        except FileNotFoundError:
            return Tokenizer({w for t in texts for w in t.split()})

    def fit(self, X, y=None):
        texts = check_texts(X)
        cfg = TrainConfig(
            batch_size=self.batch_size,
            epochs=self.epochs,
            lr=self.lr,
            optimizer=self.optimizer,
            seed=self.seed,
            hidden=self.dim,
            layers=self.layers,
        )
        items = [(f"fit-{i:06d}", t) for i, t in enumerate(texts)]
        self.encoder_ = autoencode_train(items, cfg, self._tokenizer(texts))
        return self

    def transform(self, X) -> np.ndarray:
        texts = check_texts(X)
        items = [(f"tx-{i:06d}", t) for i, t in enumerate(texts)]
        return self.encoder_.encode_batch(items).matrix


class DimensionShuffler(BaseEstimator, TransformerMixin):
    """Fixed seeded permutation of embedding dimensions."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def fit(self, X, y=None):
        X = check_embedding_matrix(X)
        rng = np.random.Generator(np.random.PCG64(self.seed))
        self.permutation_ = rng.permutation(X.shape[1])
        return self

    def transform(self, X) -> np.ndarray:
        X = check_embedding_matrix(X, dim=len(self.permutation_))
        return X[:, self.permutation_]


class RecoveryProbe(BaseEstimator):
    """Decoder probe: fit on (embeddings, captions), predict captions back.

    ``score`` returns mean exact match, so the estimator plugs into model
    selection utilities directly.
    """

    def __init__(
        self,
        hidden: int = 256,
        layers: int = 2,
        epochs: int = 10,
        batch_size: int = 64,
        lr: float = 1e-3,
        optimizer: str = "adam",
        conditioning: str = "attn",
        beam: int = 5,
        max_len: int = 24,
        val_fraction: float = 0.1,
        seed: int = 0,
        vocabulary_path: str | None = None,
    ):
        self.hidden = hidden
        self.layers = layers
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.optimizer = optimizer
        self.conditioning = conditioning
        self.beam = beam
        self.max_len = max_len
        self.val_fraction = val_fraction
        self.seed = seed
        self.vocabulary_path = vocabulary_path

    def _config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            epochs=self.epochs,
            lr=self.lr,
            optimizer=self.optimizer,
            seed=self.seed,
            val_fraction=self.val_fraction,
            max_len=self.max_len,
            beam=self.beam,
            hidden=self.hidden,
            layers=self.layers,
            conditioning=self.conditioning,
        )

    def fit(self, X, y):
        X = check_embedding_matrix(X)
        y = check_texts(y, name="y")
        check_paired_lengths(X, y)
        tokenizer = None
        if self.vocabulary_path is not None:
            tokenizer = Tokenizer.from_vocabulary(load_vocabulary(self.vocabulary_path))

        class _Precomputed:
            name = "precomputed"
            dim = X.shape[1]

        items = [(f"fit-{i:06d}", t) for i, t in enumerate(y)]
        self.checkpoint_: ProbeCheckpoint = train_probe(
            _Precomputed(), items, self._config(), tokenizer=tokenizer, embeddings=X
        )
        return self

    def predict(self, X) -> list[str]:
        if not hasattr(self, "checkpoint_"):
            raise RuntimeError("RecoveryProbe.predict called before fit")
        X = check_embedding_matrix(X, dim=self.checkpoint_.encoder_dim)
        return [text for text, _ in decode_embeddings(self.checkpoint_, X, beam=self.beam)]

    def score(self, X, y) -> float:
        y = check_texts(y, name="y")
        preds = self.predict(X)
        check_paired_lengths(preds, y, "predictions", "y")
        return float(np.mean([exact_match(r, p) for r, p in zip(y, preds)]))
