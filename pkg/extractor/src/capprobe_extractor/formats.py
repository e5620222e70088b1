"""File formats shared with the probing toolkit.

Independent implementations of the interchange contracts: the `EMB1`
embedding-table binary (+ JSON sidecar manifest), the prompts JSONL reader,
and the pair-score JSONL writer.  Byte layouts must stay bit-compatible
with the consumer package.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

__all__ = [
    "read_prompts",
    "write_embedding_table",
    "read_embedding_table",
    "write_pair_scores",
    "EMB_MAGIC",
    "EMB_DTYPE_F32",
]

EMB_MAGIC = b"EMB1"
EMB_DTYPE_F32 = 1


def read_prompts(path: str | Path) -> list[tuple[str, str]]:
    """(id, text) pairs from a corpus JSONL file; ids must be unique."""
    items: list[tuple[str, str]] = []
    seen: set[str] = set()
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                pid, text = obj["id"], obj["text"]
            except (json.JSONDecodeError, KeyError) as err:
                raise ValueError(f"{path}:{lineno}: bad prompt record: {err}") from err
            if pid in seen:
                raise ValueError(f"{path}:{lineno}: duplicate prompt id {pid!r}")
            seen.add(pid)
            items.append((pid, text))
    if not items:
        raise ValueError(f"{path}: no prompts")
    return items


def _atomic_write(path: Path, payload: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_embedding_table(
    path: str | Path, ids: list[str], matrix: np.ndarray, encoder_name: str
) -> None:
    """EMB1 layout: magic, u32 count, u32 dim, u8 dtype tag (1 = f32), then
    count x dim little-endian float32; sidecar JSON manifest at <path>.json."""
    path = Path(path)
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise ValueError("matrix must be (len(ids), dim)")
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate ids")
    body = (
        EMB_MAGIC
        + struct.pack("<IIB", len(ids), matrix.shape[1], EMB_DTYPE_F32)
        + np.ascontiguousarray(matrix, dtype="<f4").tobytes()
    )
    _atomic_write(path, body)
    manifest = json.dumps({"encoder_name": encoder_name, "ids": list(ids)},
                          sort_keys=True).encode("utf-8")
    _atomic_write(Path(str(path) + ".json"), manifest)


def read_embedding_table(path: str | Path) -> tuple[list[str], np.ndarray, str]:
    path = Path(path)
    with path.open("rb") as fh:
        if fh.read(4) != EMB_MAGIC:
            raise ValueError(f"{path}: bad magic")
        count, dim, tag = struct.unpack("<IIB", fh.read(9))
        if tag != EMB_DTYPE_F32:
            raise ValueError(f"{path}: unsupported dtype tag {tag}")
        buf = fh.read(4 * count * dim)
        if len(buf) != 4 * count * dim:
            raise ValueError(f"{path}: truncated")
        matrix = np.frombuffer(buf, dtype="<f4").reshape(count, dim).copy()
    manifest = json.loads(Path(str(path) + ".json").read_text(encoding="utf-8"))
    return manifest["ids"], matrix, manifest.get("encoder_name", "unknown")


def write_pair_scores(path: str | Path, records: list[dict]) -> None:
    """Pair-score JSONL; one object per line, keys sorted for reproducibility."""
    payload = "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in records)
    _atomic_write(Path(path), payload.encode("utf-8"))
