"""Minimal dense-tensor training stack: layers, gradients, optimizers."""

from .checkpoint import CheckpointFormatError, load_blob, save_blob
from .layers import (
    Embedding,
    GRUCell,
    LayerNorm,
    Linear,
    MemoryAttention,
    SoftmaxCrossEntropy,
    log_softmax,
)
from .optim import Adam, AdafactorLite, make_optimizer
from .params import NumericError, Parameter, assert_finite

__all__ = [
    "Adam",
    "AdafactorLite",
    "CheckpointFormatError",
    "Embedding",
    "GRUCell",
    "LayerNorm",
    "Linear",
    "MemoryAttention",
    "NumericError",
    "Parameter",
    "SoftmaxCrossEntropy",
    "assert_finite",
    "load_blob",
    "log_softmax",
    "make_optimizer",
    "save_blob",
]
