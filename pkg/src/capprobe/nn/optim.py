"""Optimizers: Adam (default) and a factored-second-moment variant."""

from __future__ import annotations

import numpy as np

from .params import Parameter

__all__ = ["Adam", "AdafactorLite", "make_optimizer"]


class Adam:
    """Adam with bias correction; gradients are zeroed after each step."""

    def __init__(self, params: list[Parameter], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / b1t) / (np.sqrt(v / b2t) + self.eps)
            p.value -= (self.lr * update).astype(p.value.dtype)
            p.zero_grad()


class AdafactorLite:
    """Second-moment-only optimizer with factored accumulators for matrices.

    Matrices keep running row/column means of squared gradients whose outer
    product reconstructs the full second moment; vectors keep it unfactored.
    Updates are RMS-clipped to at most ``clip`` per coordinate on average.
    """

    def __init__(self, params: list[Parameter], lr: float = 1e-3,
                 beta2: float = 0.999, eps: float = 1e-30, clip: float = 1.0):
        self.params = list(params)
        self.lr = lr
        self.beta2 = beta2
        self.eps = eps
        self.clip = clip
        self.t = 0
        self.state: list[tuple] = []
        for p in self.params:
            if p.value.ndim == 2:
                r = np.zeros(p.value.shape[0], dtype=np.float64)
                c = np.zeros(p.value.shape[1], dtype=np.float64)
                self.state.append(("factored", r, c))
            else:
                self.state.append(("full", np.zeros_like(p.value, dtype=np.float64)))

    def step(self) -> None:
        self.t += 1
        correction = 1.0 - self.beta2**self.t
        for p, st in zip(self.params, self.state):
            g = p.grad.astype(np.float64)
            g2 = g * g + self.eps
            if st[0] == "factored":
                _, r, c = st
                r *= self.beta2
                r += (1.0 - self.beta2) * g2.mean(axis=1)
                c *= self.beta2
                c += (1.0 - self.beta2) * g2.mean(axis=0)
                vhat = np.outer(r, c) / max(r.mean(), self.eps) / correction
            else:
                _, v = st
                v *= self.beta2
                v += (1.0 - self.beta2) * g2
                vhat = v / correction
            update = g / np.sqrt(vhat + self.eps)
            rms = np.sqrt((update * update).mean())
            if rms > self.clip:
                update *= self.clip / rms
            p.value -= (self.lr * update).astype(p.value.dtype)
            p.zero_grad()


def make_optimizer(kind: str, params: list[Parameter], lr: float):
    if kind == "adam":
        return Adam(params, lr=lr)
    if kind == "adafactor":
        return AdafactorLite(params, lr=lr)
    raise ValueError(f"unknown optimizer {kind!r}")
