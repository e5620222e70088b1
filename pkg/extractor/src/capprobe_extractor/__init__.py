"""Bridge from pretrained text/vision models to capprobe's file formats."""

__version__ = "0.1.0"

from .export import export_embeddings, score_pairs
from .formats import read_embedding_table, read_prompts, write_embedding_table
from .models import MODELS, ModelSpec, ModelUnavailableError, load_model

__all__ = [
    "MODELS",
    "ModelSpec",
    "ModelUnavailableError",
    "export_embeddings",
    "load_model",
    "read_embedding_table",
    "read_prompts",
    "score_pairs",
    "write_embedding_table",
]
