"""Model registry and loaders.

Pretrained families need the ``models`` extra (torch, transformers,
sentence-transformers) plus downloadable or cached weights; loading
failures raise ``ModelUnavailableError`` so callers can distinguish an
environment gap from bad input.  The ``toy-color`` family is a dependency-
free deterministic scorer for exercising the file contracts end to end.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = ["ModelSpec", "MODELS", "ModelUnavailableError", "load_model", "ToyColorModel"]


class ModelUnavailableError(RuntimeError):
    """The requested pretrained model cannot be loaded in this environment."""


@dataclass(frozen=True)
class ModelSpec:
    name: str
    family: str          # "clip" | "sbert" | "toy"
    checkpoint: str      # hub id, or "builtin" for the toy family
    dim: int


MODELS: dict[str, ModelSpec] = {
    spec.name: spec
    for spec in [
        ModelSpec("clip-vit-b32", "clip", "openai/clip-vit-base-patch32", 512),
        ModelSpec("clip-vit-l14", "clip", "openai/clip-vit-large-patch14", 768),
        ModelSpec(
            "roberta-clip-vit-b32",
            "clip",
            "laion/CLIP-ViT-B-32-roberta-base-laion2B-s12B-b32k",
            512,
        ),
        ModelSpec("sbert", "sbert", "sentence-transformers/all-mpnet-base-v2", 768),
        ModelSpec("toy-color", "toy", "builtin", 3),
    ]
}


class ClipModel:
    def __init__(self, spec: ModelSpec):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as err:
            raise ModelUnavailableError(
                f"{spec.name} needs the 'models' extra: {err}"
            ) from err
        try:
            self.model = CLIPModel.from_pretrained(spec.checkpoint)
            self.processor = CLIPProcessor.from_pretrained(spec.checkpoint)
        except Exception as err:
            raise ModelUnavailableError(
                f"cannot load {spec.checkpoint!r} (weights not cached and hub "
                f"unreachable?): {err}"
            ) from err
        self.model.eval()
        self.torch = torch
        self.spec = spec

    def encode_texts(self, texts: list[str], batch_size: int = 32) -> np.ndarray:
        out = []
        with self.torch.no_grad():
            for start in range(0, len(texts), batch_size):
                chunk = texts[start : start + batch_size]
                inputs = self.processor(
                    text=chunk, return_tensors="pt", padding=True, truncation=True
                )
                feats = self.model.get_text_features(**inputs)
                out.append(feats.cpu().numpy().astype(np.float32))
        return np.concatenate(out, axis=0)

    def encode_image(self, path: str | Path) -> np.ndarray:
        image = Image.open(path).convert("RGB")
        with self.torch.no_grad():
            inputs = self.processor(images=image, return_tensors="pt")
            feats = self.model.get_image_features(**inputs)
        return feats[0].cpu().numpy().astype(np.float32)

    def match_score(self, text_feat: np.ndarray, image_feat: np.ndarray) -> float:
        t = text_feat / (np.linalg.norm(text_feat) + 1e-12)
        i = image_feat / (np.linalg.norm(image_feat) + 1e-12)
        return float(100.0 * t @ i)


class SbertModel:
    def __init__(self, spec: ModelSpec):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as err:
            raise ModelUnavailableError(
                f"{spec.name} needs the 'models' extra: {err}"
            ) from err
        try:
            self.model = SentenceTransformer(spec.checkpoint)
        except Exception as err:
            raise ModelUnavailableError(
                f"cannot load {spec.checkpoint!r}: {err}"
            ) from err
        self.spec = spec

    def encode_texts(self, texts: list[str], batch_size: int = 32) -> np.ndarray:
        return np.asarray(
            self.model.encode(
                texts,
                batch_size=batch_size,
                convert_to_numpy=True,
                show_progress_bar=False,
            ),
            dtype=np.float32,
        )

    def encode_image(self, path):
        raise ModelUnavailableError("sbert is text-only; it cannot score images")

    def match_score(self, text_feat, image_feat):
        raise ModelUnavailableError("sbert is text-only; it cannot score images")


# Color prototypes for the toy family: word -> RGB in [0, 1].
_TOY_COLORS = {
    "red": (1.0, 0.0, 0.0),
    "green": (0.0, 1.0, 0.0),
    "blue": (0.0, 0.0, 1.0),
    "yellow": (1.0, 1.0, 0.0),
    "cyan": (0.0, 1.0, 1.0),
    "magenta": (1.0, 0.0, 1.0),
    "white": (1.0, 1.0, 1.0),
    "gray": (0.5, 0.5, 0.5),
    "orange": (1.0, 0.5, 0.0),
    "purple": (0.5, 0.0, 0.5),
}


class ToyColorModel:
    """Deterministic color matcher: a caption embeds as the mean RGB of its
    color words (tiny pseudo-random vector otherwise), an image as its mean
    pixel RGB; the match score is the cosine between the two."""

    def __init__(self, spec: ModelSpec | None = None):
        self.spec = spec or MODELS["toy-color"]

    def encode_texts(self, texts: list[str], batch_size: int = 32) -> np.ndarray:
        rows = []
        for text in texts:
            colors = [_TOY_COLORS[w] for w in text.lower().split() if w in _TOY_COLORS]
            if colors:
                rows.append(np.mean(colors, axis=0))
            else:
                digest = hashlib.blake2b(text.encode("utf-8"), digest_size=3).digest()
                rows.append(np.array([b / 255.0 for b in digest]))
        return np.asarray(rows, dtype=np.float32)

    def encode_image(self, path: str | Path) -> np.ndarray:
        image = Image.open(path).convert("RGB")
        arr = np.asarray(image, dtype=np.float32) / 255.0
        return arr.reshape(-1, 3).mean(axis=0)

    def match_score(self, text_feat: np.ndarray, image_feat: np.ndarray) -> float:
        t = text_feat / (np.linalg.norm(text_feat) + 1e-12)
        i = image_feat / (np.linalg.norm(image_feat) + 1e-12)
        return float(100.0 * t @ i)


def load_model(name: str):
    if name not in MODELS:
        raise KeyError(
            f"unknown model {name!r}; available: {', '.join(sorted(MODELS))}"
        )
    spec = MODELS[name]
    if spec.family == "clip":
        return ClipModel(spec)
    if spec.family == "sbert":
        return SbertModel(spec)
    return ToyColorModel(spec)
