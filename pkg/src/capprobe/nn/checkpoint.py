"""Binary checkpoint container.

Layout: 4 magic bytes, u32 format version, u32 header length, UTF-8 JSON
header, then each parameter's values as raw little-endian float32 in header
order.  The header records parameter names/shapes plus arbitrary metadata.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

__all__ = ["save_blob", "load_blob", "CheckpointFormatError", "MAGIC", "VERSION"]

MAGIC = b"PCK1"
VERSION = 1


class CheckpointFormatError(ValueError):
    pass


def save_blob(path: str | Path, arrays: list[tuple[str, np.ndarray]], meta: dict) -> None:
    header = {
        "version": VERSION,
        "parameters": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
        "meta": meta,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load_blob(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    with Path(path).open("rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise CheckpointFormatError(f"bad magic {magic!r}")
        version, header_len = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise CheckpointFormatError(f"unsupported version {version}")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        arrays: dict[str, np.ndarray] = {}
        for entry in header["parameters"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(4 * count)
            if len(buf) != 4 * count:
                raise CheckpointFormatError(f"truncated data for {entry['name']!r}")
            arrays[entry["name"]] = np.frombuffer(buf, dtype="<f4").reshape(shape).copy()
        trailing = fh.read(1)
        if trailing:
            raise CheckpointFormatError("trailing bytes after parameter data")
    return arrays, header["meta"]
