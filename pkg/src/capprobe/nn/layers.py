"""Dense layers with exact reverse-mode gradients.

Every layer exposes ``forward(...) -> (output, cache)`` and
``backward(grad_output, cache) -> grad_inputs``; weight gradients accumulate
into the layer's parameters.  Shapes follow the comments; no general
broadcasting beyond what each layer states.
"""

from __future__ import annotations

import numpy as np

from .params import Parameter, assert_finite

__all__ = [
    "Linear",
    "Embedding",
    "LayerNorm",
    "MemoryAttention",
    "GRUCell",
    "SoftmaxCrossEntropy",
    "log_softmax",
]


def _rand_uniform(rng: np.random.Generator, shape, scale: float, dtype):
    return (rng.uniform(-scale, scale, size=shape)).astype(dtype)


class Linear:
    """y = x @ W + b, x: (..., d_in) -> y: (..., d_out)."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, name: str,
                 dtype=np.float32):
        scale = 1.0 / np.sqrt(d_in)
        self.W = Parameter(_rand_uniform(rng, (d_in, d_out), scale, dtype), f"{name}.W")
        self.b = Parameter(np.zeros(d_out, dtype=dtype), f"{name}.b")
        self.name = name

    def parameters(self) -> list[Parameter]:
        return [self.W, self.b]

    def forward(self, x: np.ndarray):
        y = x @ self.W.value + self.b.value
        return y, x

    def backward(self, dy: np.ndarray, cache) -> np.ndarray:
        x = cache
        x2 = x.reshape(-1, x.shape[-1])
        dy2 = dy.reshape(-1, dy.shape[-1])
        self.W.accumulate(x2.T @ dy2)
        self.b.accumulate(dy2.sum(axis=0))
        return dy @ self.W.value.T


class Embedding:
    """Token id lookup, ids: (...) int -> vectors: (..., d)."""

    def __init__(self, n_tokens: int, d: int, rng: np.random.Generator, name: str,
                 dtype=np.float32):
        self.table = Parameter(
            (rng.standard_normal((n_tokens, d)) * 0.1).astype(dtype), f"{name}.table"
        )
        self.name = name

    def parameters(self) -> list[Parameter]:
        return [self.table]

    def forward(self, ids: np.ndarray):
        return self.table.value[ids], ids

    def backward(self, dy: np.ndarray, cache) -> None:
        ids = cache
        grad = np.zeros_like(self.table.grad)
        np.add.at(grad, ids.reshape(-1), dy.reshape(-1, dy.shape[-1]))
        self.table.accumulate(grad)
        return None


class LayerNorm:
    """Normalize the last axis to zero mean / unit variance, then affine."""

    EPS = 1e-5

    def __init__(self, d: int, name: str, dtype=np.float32):
        self.gamma = Parameter(np.ones(d, dtype=dtype), f"{name}.gamma")
        self.beta = Parameter(np.zeros(d, dtype=dtype), f"{name}.beta")
        self.name = name

    def parameters(self) -> list[Parameter]:
        return [self.gamma, self.beta]

    def forward(self, x: np.ndarray):
        mean = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + self.EPS)
        xhat = (x - mean) * inv_std
        y = xhat * self.gamma.value + self.beta.value
        return y, (xhat, inv_std)

    def backward(self, dy: np.ndarray, cache) -> np.ndarray:
        xhat, inv_std = cache
        d = xhat.shape[-1]
        flat = (-1, d)
        dy2, xhat2 = dy.reshape(flat), xhat.reshape(flat)
        self.gamma.accumulate((dy2 * xhat2).sum(axis=0))
        self.beta.accumulate(dy2.sum(axis=0))
        dxhat = dy * self.gamma.value
        dx = (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        ) * inv_std
        return dx


class MemoryAttention:
    """Single-head scaled-dot attention of a query over a short memory.

    query: (B, d_model), memory: (B, M, d_model) -> context: (B, d_model).
    The probe uses M=1 (one conditioning vector standing in for a full
    encoder memory); the layer itself works for any M >= 1.
    """

    def __init__(self, d_model: int, rng: np.random.Generator, name: str,
                 dtype=np.float32):
        scale = 1.0 / np.sqrt(d_model)
        self.Wq = Parameter(_rand_uniform(rng, (d_model, d_model), scale, dtype), f"{name}.Wq")
        self.Wk = Parameter(_rand_uniform(rng, (d_model, d_model), scale, dtype), f"{name}.Wk")
        self.Wv = Parameter(_rand_uniform(rng, (d_model, d_model), scale, dtype), f"{name}.Wv")
        self.Wo = Parameter(_rand_uniform(rng, (d_model, d_model), scale, dtype), f"{name}.Wo")
        self.d_model = d_model
        self.name = name

    def parameters(self) -> list[Parameter]:
        return [self.Wq, self.Wk, self.Wv, self.Wo]

    def forward(self, query: np.ndarray, memory: np.ndarray):
        B, M, d = memory.shape
        q = query @ self.Wq.value                                  # (B, d)
        mem2 = memory.reshape(B * M, d)
        k = (mem2 @ self.Wk.value).reshape(B, M, d)
        v = (mem2 @ self.Wv.value).reshape(B, M, d)
        scores = np.einsum("bd,bmd->bm", q, k) / np.sqrt(self.d_model)
        scores = scores - scores.max(axis=1, keepdims=True)
        alpha = np.exp(scores)
        alpha /= alpha.sum(axis=1, keepdims=True)                  # (B, M)
        ctx = np.einsum("bm,bmd->bd", alpha, v)
        out = ctx @ self.Wo.value
        return out, (query, memory, q, k, v, alpha, ctx)

    def backward(self, dout: np.ndarray, cache):
        query, memory, q, k, v, alpha, ctx = cache
        B, M, d = memory.shape
        self.Wo.accumulate(ctx.T @ dout)
        dctx = dout @ self.Wo.value.T                              # (B, d)
        dalpha = np.einsum("bd,bmd->bm", dctx, v)
        dv = alpha[:, :, None] * dctx[:, None, :]                  # (B, M, d)
        # softmax jacobian
        dscores = alpha * (dalpha - (dalpha * alpha).sum(axis=1, keepdims=True))
        dscores = dscores / np.sqrt(self.d_model)
        dq = np.einsum("bm,bmd->bd", dscores, k)
        dk = dscores[:, :, None] * q[:, None, :]
        self.Wq.accumulate(query.T @ dq)
        dquery = dq @ self.Wq.value.T
        mem2 = memory.reshape(B * M, d)
        dk2 = dk.reshape(B * M, d)
        dv2 = dv.reshape(B * M, d)
        self.Wk.accumulate(mem2.T @ dk2)
        self.Wv.accumulate(mem2.T @ dv2)
        dmemory = (dk2 @ self.Wk.value.T + dv2 @ self.Wv.value.T).reshape(B, M, d)
        return dquery, dmemory


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class GRUCell:
    """Gated recurrent cell, x: (B, d_in), h: (B, d_h) -> h': (B, d_h)."""

    def __init__(self, d_in: int, d_h: int, rng: np.random.Generator, name: str,
                 dtype=np.float32):
        s_in, s_h = 1.0 / np.sqrt(d_in), 1.0 / np.sqrt(d_h)
        def w(shape, scale, suffix):
            return Parameter(_rand_uniform(rng, shape, scale, dtype), f"{name}.{suffix}")
        self.Wz, self.Wr, self.Wn = (w((d_in, d_h), s_in, s) for s in ("Wz", "Wr", "Wn"))
        self.Uz, self.Ur, self.Un = (w((d_h, d_h), s_h, s) for s in ("Uz", "Ur", "Un"))
        self.bz = Parameter(np.zeros(d_h, dtype=dtype), f"{name}.bz")
        self.br = Parameter(np.zeros(d_h, dtype=dtype), f"{name}.br")
        self.bn = Parameter(np.zeros(d_h, dtype=dtype), f"{name}.bn")
        self.bhn = Parameter(np.zeros(d_h, dtype=dtype), f"{name}.bhn")
        self.name = name

    def parameters(self) -> list[Parameter]:
        return [self.Wz, self.Wr, self.Wn, self.Uz, self.Ur, self.Un,
                self.bz, self.br, self.bn, self.bhn]

    def forward(self, x: np.ndarray, h: np.ndarray):
        z = _sigmoid(x @ self.Wz.value + h @ self.Uz.value + self.bz.value)
        r = _sigmoid(x @ self.Wr.value + h @ self.Ur.value + self.br.value)
        hn = h @ self.Un.value + self.bhn.value
        n = np.tanh(x @ self.Wn.value + r * hn + self.bn.value)
        h_new = (1.0 - z) * n + z * h
        return h_new, (x, h, z, r, n, hn)

    def backward(self, dh_new: np.ndarray, cache):
        x, h, z, r, n, hn = cache
        dn = dh_new * (1.0 - z)
        dz = dh_new * (h - n)
        dh = dh_new * z

        dan = dn * (1.0 - n * n)
        dr = dan * hn
        dhn = dan * r
        daz = dz * z * (1.0 - z)
        dar = dr * r * (1.0 - r)

        self.Wn.accumulate(x.T @ dan)
        self.bn.accumulate(dan.sum(axis=0))
        self.Un.accumulate(h.T @ dhn)
        self.bhn.accumulate(dhn.sum(axis=0))
        self.Wz.accumulate(x.T @ daz)
        self.bz.accumulate(daz.sum(axis=0))
        self.Wr.accumulate(x.T @ dar)
        self.br.accumulate(dar.sum(axis=0))
        self.Uz.accumulate(h.T @ daz)
        self.Ur.accumulate(h.T @ dar)

        dx = dan @ self.Wn.value.T + daz @ self.Wz.value.T + dar @ self.Wr.value.T
        dh += dhn @ self.Un.value.T + daz @ self.Uz.value.T + dar @ self.Ur.value.T
        return dx, dh


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise log softmax over the last axis, max-subtracted for stability."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


class SoftmaxCrossEntropy:
    """Mean token-level cross entropy over masked positions.

    logits: (N, V), targets: (N,) int, mask: (N,) {0,1}.
    """

    def forward(self, logits: np.ndarray, targets: np.ndarray, mask: np.ndarray):
        logp = log_softmax(logits)
        count = float(mask.sum())
        if count == 0:
            raise ValueError("cross entropy over an empty mask")
        picked = logp[np.arange(logits.shape[0]), targets]
        loss = float(-(picked * mask).sum() / count)
        assert_finite("cross_entropy", np.asarray(loss))
        softmax = np.exp(logp)
        return loss, (softmax, targets, mask, count)

    def backward(self, cache) -> np.ndarray:
        softmax, targets, mask, count = cache
        d = softmax.copy()
        d[np.arange(d.shape[0]), targets] -= 1.0
        d *= (mask / count)[:, None]
        return d
