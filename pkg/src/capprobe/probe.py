"""The generative recovery probe P(caption | embedding).

A projection + layer norm maps the frozen caption embedding into the
decoder's width; the normalized vector conditions every decoder layer,
either as a length-1 attention memory or through an additive projection.
Training is teacher-forced cross entropy with per-epoch validation-loss
checkpoint selection; decoding is length-normalized beam search.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .encoders import EmbeddingTable, TextEncoder, Tokenizer
from .nn import (
    Embedding,
    GRUCell,
    LayerNorm,
    Linear,
    MemoryAttention,
    NumericError,
    SoftmaxCrossEntropy,
    load_blob,
    log_softmax,
    make_optimizer,
    save_blob,
)

__all__ = [
    "TrainConfig",
    "ProbeModel",
    "ProbeCheckpoint",
    "PooledEncoderModel",
    "PooledTrainableEncoder",
    "train_probe",
    "autoencode_train",
    "decode_embeddings",
    "recompute_val_loss",
    "DecodeRecordDict",
    "write_decodes",
    "read_decodes",
    "save_pooled_encoder",
    "load_pooled_encoder",
]


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    epochs: int = 10
    lr: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    val_fraction: float = 0.1
    max_len: int = 24
    beam: int = 5
    hidden: int = 256
    layers: int = 2
    conditioning: str = "attn"  # "attn" | "add"
    length_normalize: bool = True

    def __post_init__(self):
        if not (0.0 < self.val_fraction < 1.0):
            raise ValueError("val_fraction must be in (0, 1)")
        if self.beam < 1:
            raise ValueError("beam width must be >= 1")
        if self.conditioning not in ("attn", "add"):
            raise ValueError(f"unknown conditioning {self.conditioning!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


class ProbeModel:
    """Conditioned autoregressive decoder over a closed word vocabulary."""

    def __init__(self, d_embed: int, vocab_size: int, cfg: TrainConfig,
                 rng: np.random.Generator, dtype=np.float32):
        h = cfg.hidden
        self.d_embed = d_embed
        self.vocab_size = vocab_size
        self.cfg = cfg
        self.dtype = dtype
        self.proj = Linear(d_embed, h, rng, "proj", dtype)
        self.norm = LayerNorm(h, "norm", dtype)
        self.embed = Embedding(vocab_size, h, rng, "embed", dtype)
        self.blocks = []
        for l in range(cfg.layers):
            if cfg.conditioning == "attn":
                cond = MemoryAttention(h, rng, f"block{l}.attn", dtype)
            else:
                cond = Linear(h, h, rng, f"block{l}.cond", dtype)
            gru = GRUCell(h, h, rng, f"block{l}.gru", dtype)
            self.blocks.append((cond, gru))
        self.head = Linear(h, vocab_size, rng, "head", dtype)
        self.ce = SoftmaxCrossEntropy()

    def parameters(self):
        params = self.proj.parameters() + self.norm.parameters() + self.embed.parameters()
        for cond, gru in self.blocks:
            params += cond.parameters() + gru.parameters()
        return params + self.head.parameters()

    def state_arrays(self) -> list[tuple[str, np.ndarray]]:
        return [(p.name, p.value) for p in self.parameters()]

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            value = arrays[p.name]
            if tuple(value.shape) != p.value.shape:
                raise ValueError(f"shape mismatch for {p.name!r}")
            p.value[...] = value.astype(p.value.dtype)

    def _condition(self, emb: np.ndarray):
        pre, proj_cache = self.proj.forward(emb)
        cond, norm_cache = self.norm.forward(pre)
        return cond, (proj_cache, norm_cache)

    def forward_backward(self, emb, in_ids, targets, mask, *, backward=True):
        """Teacher-forced loss; returns (loss, d_embedding or None)."""
        B, T = in_ids.shape
        h = self.cfg.hidden
        cond, cond_cache = self._condition(emb.astype(self.dtype))
        memory = cond[:, None, :]

        x, embed_cache = self.embed.forward(in_ids)
        layer_in = x
        block_caches = []
        for cond_layer, gru in self.blocks:
            state = np.zeros((B, h), dtype=self.dtype)
            outs = np.empty((B, T, h), dtype=self.dtype)
            caches = []
            if self.cfg.conditioning == "add":
                cadd, ccache = cond_layer.forward(cond)
            for t in range(T):
                u0 = layer_in[:, t]
                if self.cfg.conditioning == "attn":
                    ctx, ccache_t = cond_layer.forward(u0, memory)
                    u = u0 + ctx
                else:
                    ccache_t = None
                    u = u0 + cadd
                state, gcache = gru.forward(u, state)
                outs[:, t] = state
                caches.append((ccache_t, gcache))
            block_caches.append((caches, ccache if self.cfg.conditioning == "add" else None))
            layer_in = outs

        flat = layer_in.reshape(B * T, h)
        logits, head_cache = self.head.forward(flat)
        loss, ce_cache = self.ce.forward(logits, targets.reshape(-1), mask.reshape(-1))
        if not backward:
            return loss, None

        dlogits = self.ce.backward(ce_cache)
        d_top = self.head.backward(dlogits, head_cache).reshape(B, T, h)
        dcond = np.zeros_like(cond)
        for (cond_layer, gru), (caches, add_cache) in zip(
            reversed(self.blocks), reversed(block_caches)
        ):
            d_below = np.zeros((B, T, h), dtype=self.dtype)
            dstate = np.zeros((B, h), dtype=self.dtype)
            dcadd = np.zeros((B, h), dtype=self.dtype)
            for t in range(T - 1, -1, -1):
                ccache_t, gcache = caches[t]
                du, dstate = gru.backward(d_top[:, t] + dstate, gcache)
                if self.cfg.conditioning == "attn":
                    dquery, dmem = cond_layer.backward(du, ccache_t)
                    d_below[:, t] = du + dquery
                    dcond += dmem[:, 0, :]
                else:
                    d_below[:, t] = du
                    dcadd += du
            if self.cfg.conditioning == "add":
                dcond += cond_layer.backward(dcadd, add_cache)
            d_top = d_below
        self.embed.backward(d_top, embed_cache)

        proj_cache, norm_cache = cond_cache
        dpre = self.norm.backward(dcond, norm_cache)
        demb = self.proj.backward(dpre, proj_cache)
        return loss, demb

    def step_decode(self, last_ids, states, cond):
        """One decoding step for N parallel hypotheses.

        last_ids: (N,), states: list of (N, h) per layer, cond: (N, h).
        Returns (logp (N, V), new states).
        """
        memory = cond[:, None, :]
        u_in, _ = self.embed.forward(last_ids)
        new_states = []
        for (cond_layer, gru), state in zip(self.blocks, states):
            if self.cfg.conditioning == "attn":
                ctx, _ = cond_layer.forward(u_in, memory)
                u = u_in + ctx
            else:
                cadd, _ = cond_layer.forward(cond)
                u = u_in + cadd
            state, _ = gru.forward(u, state)
            new_states.append(state)
            u_in = state
        logits, _ = self.head.forward(u_in)
        return log_softmax(logits), new_states

    def condition_only(self, emb: np.ndarray) -> np.ndarray:
        cond, _ = self._condition(emb.astype(self.dtype))
        return cond


class PooledEncoderModel:
    """Trainable encoder: token embeddings -> GRU -> mean pool over positions."""

    def __init__(self, vocab_size: int, dim: int, rng: np.random.Generator,
                 dtype=np.float32):
        self.dim = dim
        self.embed = Embedding(vocab_size, dim, rng, "enc.embed", dtype)
        self.gru = GRUCell(dim, dim, rng, "enc.gru", dtype)
        self.dtype = dtype

    def parameters(self):
        return self.embed.parameters() + self.gru.parameters()

    def state_arrays(self):
        return [(p.name, p.value) for p in self.parameters()]

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            p.value[...] = arrays[p.name].astype(p.value.dtype)

    def forward(self, ids: np.ndarray, mask: np.ndarray):
        B, T = ids.shape
        x, embed_cache = self.embed.forward(ids)
        state = np.zeros((B, self.dim), dtype=self.dtype)
        outs = np.empty((B, T, self.dim), dtype=self.dtype)
        caches = []
        for t in range(T):
            state, c = self.gru.forward(x[:, t], state)
            outs[:, t] = state
            caches.append(c)
        counts = mask.sum(axis=1, keepdims=True)
        counts = np.maximum(counts, 1.0)
        pooled = (outs * mask[:, :, None]).sum(axis=1) / counts
        return pooled.astype(self.dtype), (embed_cache, caches, mask, counts, B, T)

    def backward(self, dpooled: np.ndarray, cache) -> None:
        embed_cache, caches, mask, counts, B, T = cache
        dx = np.zeros((B, T, self.dim), dtype=self.dtype)
        dstate = np.zeros((B, self.dim), dtype=self.dtype)
        per_step = (dpooled / counts)[:, None, :] * mask[:, :, None]
        for t in range(T - 1, -1, -1):
            dxt, dstate = self.gru.backward(per_step[:, t] + dstate, caches[t])
            dx[:, t] = dxt
        self.embed.backward(dx, embed_cache)


class PooledTrainableEncoder(TextEncoder):
    """Frozen pooled encoder exposed through the TextEncoder interface."""

    def __init__(self, model: PooledEncoderModel, tokenizer: Tokenizer, name: str,
                 best_val_loss: float | None = None, best_epoch: int | None = None):
        self.model = model
        self.tokenizer = tokenizer
        self.dim = model.dim
        self.name = name
        self.best_val_loss = best_val_loss
        self.best_epoch = best_epoch

    def encode(self, tokens: Sequence[str], prompt_id: str | None = None) -> np.ndarray:
        if not tokens:
            return np.zeros(self.dim, dtype=np.float32)
        ids = np.array([self.tokenizer.encode(tokens)], dtype=np.int64)
        mask = np.ones_like(ids, dtype=np.float32)
        pooled, _ = self.model.forward(ids, mask)
        return pooled[0].astype(np.float32)

    def encode_batch(self, items: Iterable[tuple[str, str]]) -> EmbeddingTable:
        items = list(items)
        ids = [i for i, _ in items]
        token_lists = [self.tokenizer.encode(t.split()) for _, t in items]
        rows = np.zeros((len(items), self.dim), dtype=np.float32)
        if token_lists:
            T = max((len(t) for t in token_lists), default=1)
            batch = np.full((len(items), max(T, 1)), self.tokenizer.pad_id, dtype=np.int64)
            mask = np.zeros_like(batch, dtype=np.float32)
            for k, toks in enumerate(token_lists):
                batch[k, : len(toks)] = toks
                mask[k, : len(toks)] = 1.0
            pooled, _ = self.model.forward(batch, mask)
            rows = pooled.astype(np.float32)
        return EmbeddingTable(ids=ids, matrix=rows, encoder_name=self.name)

    def state_arrays(self):
        return self.model.state_arrays()


def _rng_trio(seed: int):
    """Independent streams for init, the train/val split, and batch order."""
    init_ss, split_ss, shuffle_ss = np.random.SeedSequence(seed).spawn(3)
    return (
        np.random.default_rng(init_ss),
        np.random.default_rng(split_ss),
        np.random.default_rng(shuffle_ss),
    )


def _val_split(split_rng, n: int, val_fraction: float):
    order = split_rng.permutation(n)
    n_val = max(1, int(round(val_fraction * n)))
    return order[:n_val], order[n_val:]


@dataclass
class ProbeCheckpoint:
    params: dict[str, np.ndarray]
    config: TrainConfig
    encoder_name: str
    encoder_dim: int
    val_loss: float
    epoch: int
    tokenizer_words: list[str]
    val_history: list[float] | None = None

    def build_model(self) -> tuple[ProbeModel, Tokenizer]:
        tokenizer = Tokenizer.from_word_list(self.tokenizer_words)
        model = ProbeModel(
            self.encoder_dim,
            len(tokenizer.words),
            self.config,
            np.random.default_rng(0),
        )
        model.load_state(self.params)
        return model, tokenizer

    def save(self, path: str | Path) -> None:
        model_params = sorted(self.params.items())
        meta = {
            "kind": "probe-checkpoint",
            "train_config": self.config.to_dict(),
            "encoder": {"name": self.encoder_name, "dim": self.encoder_dim},
            "val_loss": self.val_loss,
            "epoch": self.epoch,
            "tokenizer_words": self.tokenizer_words,
            "val_history": self.val_history,
        }
        save_blob(path, model_params, meta)

    @classmethod
    def load(cls, path: str | Path) -> "ProbeCheckpoint":
        arrays, meta = load_blob(path)
        if meta.get("kind") != "probe-checkpoint":
            raise ValueError(f"{path} is not a probe checkpoint")
        return cls(
            params=arrays,
            config=TrainConfig.from_dict(meta["train_config"]),
            encoder_name=meta["encoder"]["name"],
            encoder_dim=meta["encoder"]["dim"],
            val_loss=meta["val_loss"],
            epoch=meta["epoch"],
            tokenizer_words=meta["tokenizer_words"],
            val_history=meta.get("val_history"),
        )


def _pack_batch(token_ids: list[list[int]], tokenizer: Tokenizer, max_len: int):
    """BOS-prefixed inputs, EOS-suffixed targets, with a padding mask."""
    T = min(max((len(t) for t in token_ids), default=0) + 1, max_len)
    B = len(token_ids)
    in_ids = np.full((B, T), tokenizer.pad_id, dtype=np.int64)
    targets = np.full((B, T), tokenizer.pad_id, dtype=np.int64)
    mask = np.zeros((B, T), dtype=np.float32)
    for k, toks in enumerate(token_ids):
        toks = toks[: T - 1]
        seq_in = [tokenizer.bos_id] + toks
        seq_out = toks + [tokenizer.eos_id]
        in_ids[k, : len(seq_in)] = seq_in
        targets[k, : len(seq_out)] = seq_out
        mask[k, : len(seq_out)] = 1.0
    return in_ids, targets, mask


def _corpus_items(corpus) -> list[tuple[str, str]]:
    items = []
    for entry in corpus:
        if hasattr(entry, "id") and hasattr(entry, "text"):
            items.append((entry.id, entry.text))
        else:
            pid, text = entry
            items.append((pid, text))
    return items


def _epoch_loss(model, emb, ids_list, tokenizer, cfg, indices) -> float:
    total, weight = 0.0, 0.0
    for start in range(0, len(indices), cfg.batch_size):
        batch = indices[start : start + cfg.batch_size]
        in_ids, targets, mask = _pack_batch([ids_list[i] for i in batch], tokenizer, cfg.max_len)
        loss, _ = model.forward_backward(
            emb[batch], in_ids, targets, mask, backward=False
        )
        n = float(mask.sum())
        total += loss * n
        weight += n
    return total / max(weight, 1.0)


def train_probe(
    encoder: TextEncoder,
    corpus,
    cfg: TrainConfig,
    tokenizer: Tokenizer | None = None,
    embeddings: np.ndarray | None = None,
) -> ProbeCheckpoint:
    """Train the recovery probe on frozen embeddings of a caption corpus.

    Embeddings are computed once up front (the encoder is frozen).  After
    each epoch the validation loss is evaluated and the parameters from the
    best epoch are returned.  Deterministic for a fixed config seed.
    """
    items = _corpus_items(corpus)
    if len(items) < 100:
        raise ValueError(f"corpus too small ({len(items)} captions, need >= 100)")
    if tokenizer is None:
        words = sorted({w for _, text in items for w in text.split()})
        tokenizer = Tokenizer(words)

    if embeddings is None:
        table = encoder.encode_batch(items)
        embeddings = table.matrix
    emb = np.asarray(embeddings, dtype=np.float32)
    if emb.shape[0] != len(items):
        raise ValueError("embedding count does not match corpus size")

    ids_list = [tokenizer.encode(text.split()) for _, text in items]

    init_rng, split_rng, shuffle_rng = _rng_trio(cfg.seed)
    model = ProbeModel(emb.shape[1], len(tokenizer), cfg, init_rng)
    opt = make_optimizer(cfg.optimizer, model.parameters(), cfg.lr)

    val_idx, train_idx = _val_split(split_rng, len(items), cfg.val_fraction)

    history: list[float] = []
    best: tuple[float, int, dict] | None = None
    for epoch in range(cfg.epochs):
        perm = shuffle_rng.permutation(len(train_idx))
        for start in range(0, len(train_idx), cfg.batch_size):
            batch = train_idx[perm[start : start + cfg.batch_size]]
            in_ids, targets, mask = _pack_batch(
                [ids_list[i] for i in batch], tokenizer, cfg.max_len
            )
            try:
                model.forward_backward(emb[batch], in_ids, targets, mask)
            except NumericError:
                if best is not None:
                    raise NumericError(
                        f"non-finite loss at epoch {epoch}; best checkpoint was "
                        f"epoch {best[1]} (val loss {best[0]:.4f})"
                    )
                raise
            opt.step()
        val_loss = _epoch_loss(model, emb, ids_list, tokenizer, cfg, val_idx)
        history.append(float(val_loss))
        if best is None or val_loss < best[0]:
            snapshot = {name: arr.copy() for name, arr in model.state_arrays()}
            best = (val_loss, epoch, snapshot)

    assert best is not None
    val_loss, epoch, snapshot = best
    return ProbeCheckpoint(
        params=snapshot,
        config=cfg,
        encoder_name=encoder.name,
        encoder_dim=emb.shape[1],
        val_loss=float(val_loss),
        epoch=epoch,
        tokenizer_words=list(tokenizer.words),
        val_history=history,
    )


def autoencode_train(
    corpus,
    cfg: TrainConfig,
    tokenizer: Tokenizer,
    name: str = "pooled-autoenc",
) -> PooledTrainableEncoder:
    """Jointly train the pooled encoder with a scratch decoder to reconstruct
    its own input, then freeze and return the encoder (decoder discarded).

    The caller keeps training and evaluation corpora disjoint (separate
    generator seeds); encoder parameters from the epoch with the lowest
    validation loss are kept.
    """
    items = _corpus_items(corpus)
    if len(items) < 100:
        raise ValueError(f"corpus too small ({len(items)} captions, need >= 100)")
    ids_list = [tokenizer.encode(text.split()) for _, text in items]

    init_rng, split_rng, shuffle_rng = _rng_trio(cfg.seed)
    enc = PooledEncoderModel(len(tokenizer), cfg.hidden, init_rng)
    dec = ProbeModel(cfg.hidden, len(tokenizer), cfg, init_rng)
    opt = make_optimizer(cfg.optimizer, enc.parameters() + dec.parameters(), cfg.lr)

    val_idx, train_idx = _val_split(split_rng, len(items), cfg.val_fraction)

    def run_batch(batch, backward: bool) -> tuple[float, float]:
        toks = [ids_list[i][: cfg.max_len - 1] for i in batch]
        T = max(len(t) for t in toks)
        ids = np.full((len(batch), max(T, 1)), tokenizer.pad_id, dtype=np.int64)
        mask = np.zeros_like(ids, dtype=np.float32)
        for k, tt in enumerate(toks):
            ids[k, : len(tt)] = tt
            mask[k, : len(tt)] = 1.0
        pooled, enc_cache = enc.forward(ids, mask)
        in_ids, targets, dmask = _pack_batch(toks, tokenizer, cfg.max_len)
        loss, dpooled = dec.forward_backward(pooled, in_ids, targets, dmask, backward=backward)
        if backward:
            enc.backward(dpooled, enc_cache)
        return loss, float(dmask.sum())

    best: tuple[float, int, dict] | None = None
    for epoch in range(cfg.epochs):
        perm = shuffle_rng.permutation(len(train_idx))
        for start in range(0, len(train_idx), cfg.batch_size):
            batch = train_idx[perm[start : start + cfg.batch_size]]
            run_batch(batch, backward=True)
            opt.step()
        total, weight = 0.0, 0.0
        for start in range(0, len(val_idx), cfg.batch_size):
            batch = val_idx[start : start + cfg.batch_size]
            loss, n = run_batch(batch, backward=False)
            total += loss * n
            weight += n
        val_loss = total / max(weight, 1.0)
        if best is None or val_loss < best[0]:
            snapshot = {n: a.copy() for n, a in enc.state_arrays()}
            best = (val_loss, epoch, snapshot)

    assert best is not None
    enc.load_state(best[2])
    return PooledTrainableEncoder(
        enc, tokenizer, name=name, best_val_loss=float(best[0]), best_epoch=best[1]
    )


def save_pooled_encoder(encoder: PooledTrainableEncoder, path: str | Path) -> None:
    meta = {
        "kind": "pooled-encoder",
        "dim": encoder.dim,
        "name": encoder.name,
        "tokenizer_words": encoder.tokenizer.words,
    }
    save_blob(path, sorted(encoder.state_arrays()), meta)


def load_pooled_encoder(path: str | Path) -> PooledTrainableEncoder:
    arrays, meta = load_blob(path)
    if meta.get("kind") != "pooled-encoder":
        raise ValueError(f"{path} is not a pooled encoder checkpoint")
    tokenizer = Tokenizer.from_word_list(meta["tokenizer_words"])
    model = PooledEncoderModel(len(tokenizer), meta["dim"], np.random.default_rng(0))
    model.load_state(arrays)
    return PooledTrainableEncoder(model, tokenizer, name=meta["name"])


def recompute_val_loss(
    ckpt: ProbeCheckpoint,
    corpus,
    encoder: TextEncoder | None = None,
    embeddings: np.ndarray | None = None,
) -> float:
    """Re-evaluate the stored checkpoint's validation loss on the same split
    (the split stream is derived from the config seed, so it reproduces)."""
    items = _corpus_items(corpus)
    model, tokenizer = ckpt.build_model()
    if embeddings is None:
        if encoder is None:
            raise ValueError("need an encoder or precomputed embeddings")
        embeddings = encoder.encode_batch(items).matrix
    emb = np.asarray(embeddings, dtype=np.float32)
    ids_list = [tokenizer.encode(text.split()) for _, text in items]
    _, split_rng, _ = _rng_trio(ckpt.config.seed)
    val_idx, _ = _val_split(split_rng, len(items), ckpt.config.val_fraction)
    return _epoch_loss(model, emb, ids_list, tokenizer, ckpt.config, val_idx)


def _finalize(score: float, length: int, normalize: bool) -> float:
    return score / max(length, 1) if normalize else score


def decode_embeddings(
    ckpt_or_model,
    embeddings: np.ndarray,
    beam: int | None = None,
    batch_size: int = 64,
) -> list[tuple[str, float]]:
    """Beam-search decode a matrix of embeddings; returns (text, score) per
    row, where score is the length-normalized log probability.

    All finished hypotheses are pooled; expansion keeps the top ``beam``
    unfinished candidates per prompt, so with a beam at least as large as
    the full search space the result is the exact argmax.
    """
    if isinstance(ckpt_or_model, ProbeCheckpoint):
        model, tokenizer = ckpt_or_model.build_model()
        cfg = ckpt_or_model.config
    else:
        model, tokenizer, cfg = ckpt_or_model
    K = beam if beam is not None else cfg.beam
    if K < 1:
        raise ValueError("beam width must be >= 1")
    emb = np.asarray(embeddings, dtype=np.float32)
    if emb.ndim != 2 or emb.shape[1] != model.d_embed:
        raise ValueError(
            f"embedding dim {emb.shape[-1] if emb.ndim else '?'} does not match "
            f"probe input dim {model.d_embed}"
        )

    results: list[tuple[str, float]] = []
    banned = np.array([tokenizer.pad_id, tokenizer.bos_id])
    for start in range(0, emb.shape[0], batch_size):
        chunk = emb[start : start + batch_size]
        G = chunk.shape[0]
        cond = model.condition_only(chunk)                      # (G, h)
        cond_rep = np.repeat(cond, K, axis=0)                   # (G*K, h)
        states = [np.zeros((G * K, cfg.hidden), dtype=np.float32) for _ in model.blocks]
        last = np.full(G * K, tokenizer.bos_id, dtype=np.int64)
        scores = np.full((G, K), -np.inf, dtype=np.float64)
        scores[:, 0] = 0.0                                      # one live root per prompt
        tokens: list[list[list[int]]] = [[[] for _ in range(K)] for _ in range(G)]
        pools: list[list[tuple[float, tuple[int, ...]]]] = [[] for _ in range(G)]
        done = np.zeros(G, dtype=bool)

        for _ in range(cfg.max_len):
            if done.all() or not np.isfinite(scores).any():
                break
            logp, new_states = model.step_decode(last, states, cond_rep)
            logp = logp.astype(np.float64).reshape(G, K, -1)
            logp[:, :, banned] = -np.inf
            cand = scores[:, :, None] + logp                    # (G, K, V)

            new_scores = np.full_like(scores, -np.inf)
            new_last = np.full(G * K, tokenizer.bos_id, dtype=np.int64)
            reorder = np.zeros(G * K, dtype=np.int64)
            new_tokens: list[list[list[int]]] = [[[] for _ in range(K)] for _ in range(G)]
            V = cand.shape[-1]
            for g in range(G):
                if done[g]:
                    continue
                flat = cand[g].reshape(-1)
                # rank candidates; a hypothesis finishes only when its EOS
                # continuation ranks within the top K overall
                order = np.argsort(-flat, kind="stable")[: 2 * K]
                slot = 0
                for rank, idx in enumerate(order):
                    score = float(flat[idx])
                    if not np.isfinite(score):
                        break
                    k, v = divmod(int(idx), V)
                    if v == tokenizer.eos_id:
                        if rank < K:
                            seq = tuple(tokens[g][k])
                            pools[g].append(
                                (_finalize(score, len(seq) + 1, cfg.length_normalize), seq)
                            )
                    elif slot < K:
                        new_scores[g, slot] = score
                        new_tokens[g][slot] = tokens[g][k] + [v]
                        reorder[g * K + slot] = g * K + k
                        new_last[g * K + slot] = v
                        slot += 1
                    if slot >= K and rank + 1 >= K:
                        break
                # beam 1 is greedy by definition: stop at the first finish.
                # wider beams stop once no alive hypothesis can attain a
                # better final score than the pool already holds (a total of
                # T < 0 finalizing at length <= max_len scores at most
                # T / max_len when normalizing, T otherwise).
                finished = False
                if slot == 0:
                    finished = True
                elif pools[g] and len(pools[g]) >= K:
                    if K == 1:
                        finished = True
                    else:
                        pool_best = max(s for s, _ in pools[g])
                        alive_T = new_scores[g, 0]  # slots filled best-first
                        bound = (
                            alive_T / cfg.max_len if cfg.length_normalize else alive_T
                        )
                        finished = pool_best >= bound
                if finished:
                    done[g] = True
                    new_scores[g, :] = -np.inf
            states = [s[reorder] for s in new_states]
            scores = new_scores
            tokens = new_tokens
            last = new_last

        for g in range(G):
            if not done[g]:
                for k in range(K):
                    if np.isfinite(scores[g, k]) and tokens[g][k]:
                        seq = tuple(tokens[g][k])
                        pools[g].append(
                            (_finalize(float(scores[g, k]), len(seq), cfg.length_normalize), seq)
                        )
            if not pools[g]:
                results.append(("", float("-inf")))
                continue
            # ties: shorter sequence first, then lexicographically smallest
            best_score, best_seq = min(
                pools[g], key=lambda e: (-e[0], len(e[1]), e[1])
            )
            results.append((tokenizer.decode_text(best_seq), best_score))
    return results


DecodeRecordDict = dict


def write_decodes(records: list[dict], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_decodes(path: str | Path) -> list[dict]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as err:
                raise ValueError(f"{path}:{lineno}: bad decode record: {err}") from err
    return out
