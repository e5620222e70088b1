"""Command line: export embeddings, score image/caption pairs."""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .export import export_embeddings, score_pairs
from .models import MODELS, ModelUnavailableError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capprobe-extract",
        description="Export pretrained-model embeddings and pair scores "
        "into capprobe's file formats.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="corpus JSONL -> embedding table")
    p.add_argument("--model", required=True, choices=sorted(MODELS))
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int, default=32)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("score", help="pairs manifest -> pair-score JSONL")
    p.add_argument("--model", required=True, choices=sorted(MODELS))
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("models", help="list the model registry")
    p.set_defaults(func=cmd_models)
    return parser


def cmd_export(args) -> int:
    n = export_embeddings(args.model, args.corpus, args.out,
                          batch_size=args.batch_size)
    print(f"wrote {n} x {MODELS[args.model].dim} embeddings to {args.out}")
    return 0


def cmd_score(args) -> int:
    scored, failed = score_pairs(args.model, args.pairs, args.out)
    print(f"scored {scored} pairs ({failed} failed) -> {args.out}")
    return 0


def cmd_models(args) -> int:
    rows = [
        {"name": s.name, "family": s.family, "checkpoint": s.checkpoint,
         "dim": s.dim}
        for s in MODELS.values()
    ]
    print(json.dumps(sorted(rows, key=lambda r: r["name"]), indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ModelUnavailableError as err:
        print(f"environment error: {err}", file=sys.stderr)
        return 3
    except (FileNotFoundError, KeyError, ValueError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
