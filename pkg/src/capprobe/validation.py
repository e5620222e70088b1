"""Input validation helpers shared by the estimator API."""

from __future__ import annotations

import numpy as np

__all__ = ["check_texts", "check_embedding_matrix", "check_paired_lengths"]


def check_texts(X, name: str = "X") -> list[str]:
    """Validate a list of caption strings."""
    if isinstance(X, str):
        raise TypeError(f"{name} must be a sequence of strings, not a single string")
    texts = list(X)
    if not texts:
        raise ValueError(f"{name} is empty")
    for i, t in enumerate(texts):
        if not isinstance(t, str):
            raise TypeError(f"{name}[{i}] is {type(t).__name__}, expected str")
    return texts


def check_embedding_matrix(X, dim: int | None = None, name: str = "X") -> np.ndarray:
    """Validate a 2-d finite float matrix, optionally with a fixed width."""
    arr = np.asarray(X, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-d (n_samples, dim), got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} has no rows")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"{name} has dim {arr.shape[1]}, expected {dim}")
    return arr


def check_paired_lengths(X, y, x_name: str = "X", y_name: str = "y") -> None:
    if len(X) != len(y):
        raise ValueError(
            f"{x_name} and {y_name} have different lengths: {len(X)} vs {len(y)}"
        )
