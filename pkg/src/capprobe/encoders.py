"""Caption encoders: reference baselines, the trainable pooled encoder's
tokenizer, the dimension-shuffle wrapper, and file-backed embedding tables.

Every encoder maps a token sequence to one fixed-length vector.  Encoders
are immutable after construction (or after training freeze) and safe for
concurrent encode calls.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grammar import Vocabulary

__all__ = [
    "TextEncoder",
    "Tokenizer",
    "BowEncoder",
    "PositionalBowEncoder",
    "ShuffleWrapper",
    "EmbeddingTable",
    "FileBackedEncoder",
    "EmbeddingLookupError",
    "EMB_MAGIC",
    "EMB_DTYPE_F32",
]

EMB_MAGIC = b"EMB1"
EMB_DTYPE_F32 = 1


class TextEncoder:
    """Interface: ``encode(tokens) -> vector of length dim``, deterministic."""

    dim: int
    name: str = "encoder"

    def encode(self, tokens: Sequence[str], prompt_id: str | None = None) -> np.ndarray:
        raise NotImplementedError

    def encode_text(self, text: str, prompt_id: str | None = None) -> np.ndarray:
        return self.encode(text.split(), prompt_id=prompt_id)

    def encode_batch(self, items: Iterable[tuple[str, str]]) -> "EmbeddingTable":
        """items: (prompt_id, text) pairs -> table with one row per id."""
        ids, rows = [], []
        for prompt_id, text in items:
            ids.append(prompt_id)
            rows.append(self.encode(text.split(), prompt_id=prompt_id))
        matrix = np.stack(rows).astype(np.float32) if rows else np.zeros((0, self.dim), np.float32)
        return EmbeddingTable(ids=ids, matrix=matrix, encoder_name=self.name)


class Tokenizer:
    """Closed word-level vocabulary with BOS/EOS/UNK/PAD specials."""

    PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"

    def __init__(self, words: Iterable[str]):
        self.words = [self.PAD, self.BOS, self.EOS, self.UNK] + sorted(set(words))
        self.index = {w: i for i, w in enumerate(self.words)}
        self.pad_id = self.index[self.PAD]
        self.bos_id = self.index[self.BOS]
        self.eos_id = self.index[self.EOS]
        self.unk_id = self.index[self.UNK]

    @classmethod
    def from_vocabulary(cls, vocab: Vocabulary) -> "Tokenizer":
        return cls(vocab.all_surface_words())

    @classmethod
    def from_word_list(cls, words: Sequence[str]) -> "Tokenizer":
        """Rebuild from a persisted word list (specials already included)."""
        obj = cls.__new__(cls)
        obj.words = list(words)
        obj.index = {w: i for i, w in enumerate(obj.words)}
        for special, attr in ((cls.PAD, "pad_id"), (cls.BOS, "bos_id"),
                              (cls.EOS, "eos_id"), (cls.UNK, "unk_id")):
            if special not in obj.index:
                raise ValueError(f"persisted word list is missing {special!r}")
            setattr(obj, attr, obj.index[special])
        return obj

    def __len__(self) -> int:
        return len(self.words)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.index.get(t, self.unk_id) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        specials = {self.pad_id, self.bos_id, self.eos_id}
        return [self.words[i] for i in ids if i not in specials]

    def decode_text(self, ids: Sequence[int]) -> str:
        return " ".join(self.decode(ids))


def _word_vector(word: str, seed: int, dim: int) -> np.ndarray:
    """Fixed pseudo-random unit-scale vector for one word, stable across
    runs and platforms (derived from a hash, not from vocabulary order)."""
    digest = hashlib.blake2b(
        f"{seed}:{word}".encode("utf-8"), digest_size=8
    ).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))
    return rng.standard_normal(dim).astype(np.float32)


class BowEncoder(TextEncoder):
    """Mean of per-word vectors: permutation-invariant by construction."""

    def __init__(self, dim: int = 256, seed: int = 0):
        if dim < 8:
            raise ValueError("dim must be >= 8")
        self.dim = dim
        self.seed = seed
        self.name = f"bow-{dim}-s{seed}"
        self._cache: dict[str, np.ndarray] = {}

    def _vec(self, word: str) -> np.ndarray:
        v = self._cache.get(word)
        if v is None:
            v = _word_vector(word, self.seed, self.dim)
            self._cache[word] = v
        return v

    def encode(self, tokens: Sequence[str], prompt_id: str | None = None) -> np.ndarray:
        if not tokens:
            return np.zeros(self.dim, dtype=np.float32)
        acc = np.zeros(self.dim, dtype=np.float64)
        for t in sorted(tokens):  # fixed summation order: bitwise permutation invariance
            acc += self._vec(t)
        return (acc / len(tokens)).astype(np.float32)


class PositionalBowEncoder(BowEncoder):
    """Order-aware baseline: each word vector is rolled by its position, so
    order information is present but entangled across dimensions."""

    def __init__(self, dim: int = 256, seed: int = 0):
        super().__init__(dim=dim, seed=seed)
        self.name = f"bowpos-{dim}-s{seed}"

    def encode(self, tokens: Sequence[str], prompt_id: str | None = None) -> np.ndarray:
        if not tokens:
            return np.zeros(self.dim, dtype=np.float32)
        acc = np.zeros(self.dim, dtype=np.float64)
        for pos, t in enumerate(tokens):
            acc += np.roll(self._vec(t), pos % self.dim)
        return (acc / len(tokens)).astype(np.float32)


class ShuffleWrapper(TextEncoder):
    """Applies one fixed seeded permutation of dimensions to every output."""

    def __init__(self, inner: TextEncoder, seed: int = 0):
        self.inner = inner
        self.dim = inner.dim
        self.seed = seed
        rng = np.random.Generator(np.random.PCG64(seed))
        self.permutation = rng.permutation(self.dim)
        self.name = f"shuffled({inner.name},s{seed})"

    def encode(self, tokens: Sequence[str], prompt_id: str | None = None) -> np.ndarray:
        return self.inner.encode(tokens, prompt_id=prompt_id)[self.permutation]

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        """Permute the columns of a precomputed (n, dim) embedding matrix."""
        return matrix[:, self.permutation]


class EmbeddingLookupError(KeyError):
    pass


class EmbeddingTable:
    """Id-indexed matrix of caption vectors with a binary on-disk format.

    Layout: magic ``EMB1``, u32 row count, u32 dim, u8 dtype tag (1 = f32),
    then count x dim little-endian float32 values; a sidecar JSON manifest
    ``<path>.json`` holds ``{"encoder_name": ..., "ids": [...]}``.
    """

    def __init__(self, ids: list[str], matrix: np.ndarray, encoder_name: str):
        if len(ids) != matrix.shape[0]:
            raise ValueError("row count does not match id count")
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate ids in embedding table")
        if matrix.ndim != 2:
            raise ValueError("matrix must be 2-d")
        self.ids = list(ids)
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        self.encoder_name = encoder_name
        self._row = {i: k for k, i in enumerate(self.ids)}

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def row(self, prompt_id: str) -> np.ndarray:
        try:
            return self.matrix[self._row[prompt_id]]
        except KeyError:
            raise EmbeddingLookupError(
                f"no embedding stored for id {prompt_id!r}"
            ) from None

    def save(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("wb") as fh:
            fh.write(EMB_MAGIC)
            fh.write(struct.pack("<IIB", len(self.ids), self.dim, EMB_DTYPE_F32))
            fh.write(np.ascontiguousarray(self.matrix, dtype="<f4").tobytes())
        manifest = {"encoder_name": self.encoder_name, "ids": self.ids}
        Path(str(path) + ".json").write_text(
            json.dumps(manifest, sort_keys=True), encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        path = Path(path)
        with path.open("rb") as fh:
            magic = fh.read(4)
            if magic != EMB_MAGIC:
                raise ValueError(f"bad embedding table magic {magic!r}")
            count, dim, dtype_tag = struct.unpack("<IIB", fh.read(9))
            if dtype_tag != EMB_DTYPE_F32:
                raise ValueError(f"unsupported dtype tag {dtype_tag}")
            buf = fh.read(4 * count * dim)
            if len(buf) != 4 * count * dim:
                raise ValueError("truncated embedding table")
            matrix = np.frombuffer(buf, dtype="<f4").reshape(count, dim).copy()
        manifest = json.loads(Path(str(path) + ".json").read_text(encoding="utf-8"))
        if len(manifest["ids"]) != count:
            raise ValueError("manifest id count does not match table")
        return cls(manifest["ids"], matrix, manifest.get("encoder_name", "unknown"))


class FileBackedEncoder(TextEncoder):
    """Lookup encoder over a precomputed table; captions are keyed by id so
    identical texts from different corpora cannot collide."""

    def __init__(self, table: EmbeddingTable):
        self.table = table
        self.dim = table.dim
        self.name = f"file({table.encoder_name})"

    def encode(self, tokens: Sequence[str], prompt_id: str | None = None) -> np.ndarray:
        if prompt_id is None:
            raise EmbeddingLookupError("file-backed encoding requires a prompt id")
        return self.table.row(prompt_id)
