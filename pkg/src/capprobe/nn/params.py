"""Parameters and numeric guards for the training stack."""

from __future__ import annotations

import numpy as np

__all__ = ["Parameter", "NumericError", "assert_finite"]


class NumericError(ArithmeticError):
    """A non-finite value surfaced during compute; names the offending op."""


def assert_finite(name: str, arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {name}")
    return arr


class Parameter:
    """A named tensor with a same-shape gradient accumulator.

    Shapes are fixed at construction; gradients accumulate across backward
    calls and are zeroed by the optimizer step.
    """

    __slots__ = ("name", "value", "grad")

    def __init__(self, value: np.ndarray, name: str):
        self.name = name
        self.value = np.ascontiguousarray(value)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    def zero_grad(self) -> None:
        self.grad[...] = 0

    def accumulate(self, grad: np.ndarray) -> None:
        if grad.shape != self.grad.shape:
            raise ValueError(
                f"gradient shape {grad.shape} != parameter shape {self.grad.shape} "
                f"for {self.name!r}"
            )
        self.grad += grad

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.value.shape})"
