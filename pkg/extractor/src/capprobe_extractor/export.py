"""Embedding export and pair scoring pipelines."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .formats import read_prompts, write_embedding_table, write_pair_scores
from .models import MODELS, load_model

__all__ = ["export_embeddings", "score_pairs", "read_pairs_manifest"]


def export_embeddings(
    model_name: str,
    corpus_path: str | Path,
    out_path: str | Path,
    batch_size: int = 32,
) -> int:
    """Encode every corpus caption and write an embedding table.

    One row per prompt id, in corpus order; the written dim must match the
    model registry's declared dim or the export aborts.
    Returns the number of rows written.
    """
    spec = MODELS[model_name] if model_name in MODELS else None
    if spec is None:
        raise KeyError(f"unknown model {model_name!r}")
    items = read_prompts(corpus_path)
    model = load_model(model_name)
    matrix = model.encode_texts([text for _, text in items], batch_size=batch_size)
    matrix = np.asarray(matrix, dtype=np.float32)
    if matrix.shape != (len(items), spec.dim):
        raise ValueError(
            f"{model_name} produced shape {matrix.shape}, expected "
            f"({len(items)}, {spec.dim})"
        )
    write_embedding_table(out_path, [pid for pid, _ in items], matrix, spec.name)
    return len(items)


def read_pairs_manifest(path: str | Path) -> list[dict]:
    """Manifest JSON: {"pairs": [{pair_id, category, c0, c1, i0, i1}, ...]}
    with image paths resolved relative to the manifest's directory."""
    path = Path(path)
    payload = json.loads(path.read_text(encoding="utf-8"))
    pairs = payload.get("pairs")
    if not isinstance(pairs, list) or not pairs:
        raise ValueError(f"{path}: manifest holds no pairs")
    required = {"pair_id", "category", "c0", "c1", "i0", "i1"}
    out = []
    for i, pair in enumerate(pairs):
        missing = required - set(pair)
        if missing:
            raise ValueError(f"{path}: pair {i} is missing {sorted(missing)}")
        resolved = dict(pair)
        for key in ("i0", "i1"):
            resolved[key] = str((path.parent / pair[key]).resolve())
        out.append(resolved)
    return out


def score_pairs(
    model_name: str,
    manifest_path: str | Path,
    out_path: str | Path,
) -> tuple[int, int]:
    """Score every caption against both images of each pair.

    Unreadable images produce a per-record error entry and the run
    continues.  Returns (scored, failed) counts.
    """
    model = load_model(model_name)
    pairs = read_pairs_manifest(manifest_path)
    records: list[dict] = []
    scored = failed = 0
    for pair in pairs:
        try:
            text_feats = model.encode_texts([pair["c0"], pair["c1"]])
            img0 = model.encode_image(pair["i0"])
            img1 = model.encode_image(pair["i1"])
        except (OSError, ValueError) as err:
            records.append({"pair_id": pair["pair_id"], "error": str(err)})
            failed += 1
            continue
        records.append(
            {
                "pair_id": pair["pair_id"],
                "category": pair["category"],
                "c0": pair["c0"],
                "c1": pair["c1"],
                "i0": pair["i0"],
                "i1": pair["i1"],
                "s_c0_i0": model.match_score(text_feats[0], img0),
                "s_c0_i1": model.match_score(text_feats[0], img1),
                "s_c1_i0": model.match_score(text_feats[1], img0),
                "s_c1_i1": model.match_score(text_feats[1], img1),
            }
        )
        scored += 1
    write_pair_scores(out_path, records)
    return scored, failed
