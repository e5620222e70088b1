"""Command-line entry points for end-to-end runs.

Subcommands: ``gen``, ``autoenc``, ``probe``, ``decode``, ``eval-text``,
``eval-mm``, ``report``.  Every run writes a manifest recording the merged
configuration; identical manifests reproduce outputs byte-identically.
Exit codes: 0 success, 1 internal or numeric error, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .encoders import (
    BowEncoder,
    EmbeddingLookupError,
    EmbeddingTable,
    FileBackedEncoder,
    PositionalBowEncoder,
    ShuffleWrapper,
    Tokenizer,
)
from .grammar import (
    CapacityError,
    ParseError,
    SpecError,
    VocabSchemaError,
    VocabValidationError,
    bundled_vocabulary_path,
    generate_corpus,
    load_vocabulary,
    read_corpus,
    write_corpus,
)
from .mmeval import compare_models, mm_report, read_pair_records
from .nn import NumericError
from .probe import (
    ProbeCheckpoint,
    TrainConfig,
    autoencode_train,
    decode_embeddings,
    load_pooled_encoder,
    read_decodes,
    save_pooled_encoder,
    train_probe,
    write_decodes,
)
from .textmetrics import DecodeRecord, stratify

OUT_DIR_ENV = "CAPPROBE_OUT_DIR"

USER_ERRORS = (
    FileNotFoundError,
    VocabSchemaError,
    VocabValidationError,
    CapacityError,
    ParseError,
    SpecError,
    EmbeddingLookupError,
    json.JSONDecodeError,
    ValueError,
    KeyError,
)


class CliError(Exception):
    """User-facing error carrying an exit code."""

    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


def _out_dir(args) -> Path:
    out = Path(args.out_dir or os.environ.get(OUT_DIR_ENV, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(path: Path, command: str, config: dict) -> None:
    manifest = {"command": command, "config": config, "version": __version__}
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        batch_size=args.batch_size,
        epochs=args.epochs,
        lr=args.lr,
        optimizer=args.optimizer,
        seed=args.seed,
        val_fraction=args.val_fraction,
        max_len=args.max_len,
        beam=args.beam,
        hidden=args.hidden,
        layers=args.layers,
        conditioning=args.conditioning,
    )


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--optimizer", choices=["adam", "adafactor"], default="adam")
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--max-len", type=int, default=24)
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--conditioning", choices=["attn", "add"], default="attn")


def cmd_gen(args) -> int:
    vocab_path = args.vocab or bundled_vocabulary_path()
    vocab = load_vocabulary(vocab_path)
    overrides = {}
    for item in args.per_type_override or []:
        cell, _, count = item.partition("=")
        if not count.isdigit():
            raise CliError(f"bad --per-type-override {item!r}, expected CELL=N")
        overrides[cell] = int(count)
    corpus = generate_corpus(vocab, args.per_type, args.seed, per_type_overrides=overrides)

    out = _out_dir(args) / args.out
    write_corpus(corpus, out)
    counts: dict[str, int] = {}
    for p in corpus:
        counts[p.type_key] = counts.get(p.type_key, 0) + 1
    summary = {"total": len(corpus), "cells": counts, "seed": args.seed}
    Path(str(out) + ".summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    _write_manifest(
        Path(str(out) + ".manifest.json"),
        "gen",
        {
            "vocab": str(vocab_path),
            "per_type": args.per_type,
            "seed": args.seed,
            "per_type_overrides": overrides,
            "out": str(out),
        },
    )
    print(f"wrote {len(corpus)} prompts over {len(counts)} cells to {out}")
    return 0


def cmd_autoenc(args) -> int:
    vocab = load_vocabulary(args.vocab or bundled_vocabulary_path())
    corpus = read_corpus(args.train_corpus)
    cfg = _train_config(args)
    tokenizer = Tokenizer.from_vocabulary(vocab)
    encoder = autoencode_train(corpus, cfg, tokenizer)
    out = _out_dir(args) / args.out
    save_pooled_encoder(encoder, out)
    _write_manifest(
        Path(str(out) + ".manifest.json"),
        "autoenc",
        {"train_corpus": str(args.train_corpus), "out": str(out), **cfg.to_dict()},
    )
    print(f"trained pooled autoencoder ({encoder.dim} dims) -> {out}")
    return 0


def _resolve_encoder(args, cfg: TrainConfig, train_corpus, tokenizer):
    """Build the frozen encoder named by --encoder (training it if needed)."""
    spec = args.encoder
    if spec == "bow":
        encoder = BowEncoder(dim=args.encoder_dim, seed=args.seed)
    elif spec == "bow-pos":
        encoder = PositionalBowEncoder(dim=args.encoder_dim, seed=args.seed)
    elif spec == "pooled-autoenc":
        encoder = autoencode_train(train_corpus, cfg, tokenizer)
    elif spec.startswith("pooled:"):
        encoder = load_pooled_encoder(spec.split(":", 1)[1])
    elif spec.startswith("file:"):
        if not args.eval_embeddings:
            raise CliError("--encoder file:... requires --eval-embeddings")
        encoder = FileBackedEncoder(EmbeddingTable.load(spec.split(":", 1)[1]))
    else:
        raise CliError(f"unknown encoder spec {spec!r}")
    if args.shuffle:
        encoder = ShuffleWrapper(encoder, seed=args.shuffle_seed)
    return encoder


def _check_coverage(table: EmbeddingTable, corpus, label: str) -> None:
    missing = [p.id for p in corpus if p.id not in set(table.ids)]
    if missing:
        raise EmbeddingLookupError(
            f"{label} embedding table is missing {len(missing)} ids "
            f"(first: {missing[:3]})"
        )


def _decode_corpus(ckpt: ProbeCheckpoint, encoder, corpus, beam: int) -> list[dict]:
    table = encoder.encode_batch([(p.id, p.text) for p in corpus])
    decs = decode_embeddings(ckpt, table.matrix, beam=beam)
    return [
        {
            "id": p.id,
            "reference": p.text,
            "prediction": text,
            "beam": beam,
            "logprob": score,
        }
        for p, (text, score) in zip(corpus, decs)
    ]


def _eval_records(decodes: list[dict], corpus) -> list[DecodeRecord]:
    by_id = {p.id: p for p in corpus}
    records = []
    for d in decodes:
        p = by_id.get(d["id"])
        if p is None:
            raise CliError(f"decode id {d['id']!r} not present in the corpus")
        records.append(
            DecodeRecord(
                prompt_id=p.id,
                reference=d["reference"],
                prediction=d["prediction"],
                type_key=p.type_key,
                order_sensitive=p.order_sensitive,
            )
        )
    return records


def cmd_probe(args) -> int:
    vocab = load_vocabulary(args.vocab or bundled_vocabulary_path())
    tokenizer = Tokenizer.from_vocabulary(vocab)
    train = read_corpus(args.train_corpus)
    evalc = read_corpus(args.eval_corpus)
    cfg = _train_config(args)

    encoder = _resolve_encoder(args, cfg, train, tokenizer)

    embeddings = None
    if args.encoder.startswith("file:"):
        inner = encoder.inner if isinstance(encoder, ShuffleWrapper) else encoder
        _check_coverage(inner.table, train, "train")
        eval_table = EmbeddingTable.load(args.eval_embeddings)
        _check_coverage(eval_table, evalc, "eval")

    ckpt = train_probe(encoder, train, cfg, tokenizer=tokenizer, embeddings=embeddings)

    out_dir = _out_dir(args)
    prefix = args.out_prefix
    ckpt_path = out_dir / f"{prefix}.ckpt"
    ckpt.save(ckpt_path)
    if args.encoder == "pooled-autoenc":
        inner = encoder.inner if isinstance(encoder, ShuffleWrapper) else encoder
        save_pooled_encoder(inner, out_dir / f"{prefix}.encoder.ckpt")

    if args.encoder.startswith("file:"):
        eval_encoder = FileBackedEncoder(EmbeddingTable.load(args.eval_embeddings))
        if args.shuffle:
            eval_encoder = ShuffleWrapper(eval_encoder, seed=args.shuffle_seed)
    else:
        eval_encoder = encoder
    decodes = _decode_corpus(ckpt, eval_encoder, evalc, cfg.beam)
    dec_path = out_dir / f"{prefix}.decodes.jsonl"
    write_decodes(decodes, dec_path)

    report = stratify(_eval_records(decodes, evalc))
    report_path = out_dir / f"{prefix}.report.json"
    report_path.write_text(report.to_json() + "\n", encoding="utf-8")

    _write_manifest(
        out_dir / f"{prefix}.manifest.json",
        "probe",
        {
            "encoder": args.encoder,
            "encoder_dim": args.encoder_dim,
            "shuffle": args.shuffle,
            "shuffle_seed": args.shuffle_seed,
            "train_corpus": str(args.train_corpus),
            "eval_corpus": str(args.eval_corpus),
            **cfg.to_dict(),
        },
    )
    print(
        f"probe[{args.encoder}] val_loss={ckpt.val_loss:.4f} "
        f"overall EM={report.overall_em:.1f}% core EM={report.core_em:.1f}% "
        f"-> {report_path}"
    )
    return 0


def cmd_decode(args) -> int:
    ckpt = ProbeCheckpoint.load(args.checkpoint)
    corpus = read_corpus(args.eval_corpus)
    if args.eval_embeddings:
        table = EmbeddingTable.load(args.eval_embeddings)
        _check_coverage(table, corpus, "eval")
        encoder = FileBackedEncoder(table)
    elif args.encoder == "bow":
        encoder = BowEncoder(dim=ckpt.encoder_dim, seed=args.seed)
    elif args.encoder == "bow-pos":
        encoder = PositionalBowEncoder(dim=ckpt.encoder_dim, seed=args.seed)
    elif args.encoder and args.encoder.startswith("pooled:"):
        encoder = load_pooled_encoder(args.encoder.split(":", 1)[1])
    else:
        raise CliError("decode needs --eval-embeddings or a builtin --encoder")
    if args.shuffle:
        encoder = ShuffleWrapper(encoder, seed=args.shuffle_seed)

    decodes = _decode_corpus(ckpt, encoder, corpus, args.beam or ckpt.config.beam)
    out = _out_dir(args) / args.out
    write_decodes(decodes, out)
    _write_manifest(
        Path(str(out) + ".manifest.json"),
        "decode",
        {
            "checkpoint": str(args.checkpoint),
            "eval_corpus": str(args.eval_corpus),
            "beam": args.beam or ckpt.config.beam,
            "encoder": args.encoder,
            "eval_embeddings": args.eval_embeddings and str(args.eval_embeddings),
            "shuffle": args.shuffle,
            "shuffle_seed": args.shuffle_seed,
        },
    )
    print(f"decoded {len(decodes)} prompts -> {out}")
    return 0


def cmd_eval_text(args) -> int:
    decodes = read_decodes(args.decodes)
    corpus = read_corpus(args.corpus)
    report = stratify(_eval_records(decodes, corpus))
    rendered = {
        "json": report.to_json() + "\n",
        "md": report.to_markdown() + "\n",
        "csv": report.to_csv(),
    }[args.format]
    if args.out:
        out = _out_dir(args) / args.out
        out.write_text(rendered, encoding="utf-8")
        _write_manifest(
            Path(str(out) + ".manifest.json"),
            "eval-text",
            {"decodes": str(args.decodes), "corpus": str(args.corpus),
             "format": args.format},
        )
        print(f"wrote {args.format} report to {out}")
    else:
        sys.stdout.write(rendered)
    return 0


def cmd_eval_mm(args) -> int:
    records = read_pair_records(args.pairs)
    if args.compare:
        other = read_pair_records(args.compare)
        result = compare_models(records, other)
        rendered = json.dumps(result, sort_keys=True, indent=2) + "\n"
    else:
        report = mm_report(records, relaxed=args.relaxed)
        rendered = (
            report.to_markdown() if args.format == "md" else report.to_json() + "\n"
        )
    if args.out:
        out = _out_dir(args) / args.out
        out.write_text(rendered, encoding="utf-8")
        _write_manifest(
            Path(str(out) + ".manifest.json"),
            "eval-mm",
            {
                "pairs": str(args.pairs),
                "compare": args.compare and str(args.compare),
                "relaxed": args.relaxed,
                "format": args.format,
            },
        )
        print(f"wrote report to {out}")
    else:
        sys.stdout.write(rendered)
    return 0


def cmd_report(args) -> int:
    payload = json.loads(Path(args.report).read_text(encoding="utf-8"))
    if "cells" in payload:
        from .textmetrics import CellStats, EvalReport

        report = EvalReport(
            cells={
                k: CellStats(v["count"], v["em"], v["bleu"])
                for k, v in payload["cells"].items()
            },
            total=payload["total"],
            overall_em=payload["overall_em"],
            overall_bleu=payload["overall_bleu"],
            core_em=payload["core_em"],
            core_bleu=payload["core_bleu"],
            shuffled_pct=payload["shuffled_pct"],
            order_sensitive_count=payload["order_sensitive_count"],
        )
        rendered = report.to_markdown() + "\n" if args.format == "md" else report.to_csv()
    else:
        raise CliError(f"{args.report} does not look like a text-eval report")
    if args.out:
        out = _out_dir(args) / args.out
        out.write_text(rendered, encoding="utf-8")
        print(f"wrote {args.format} to {out}")
    else:
        sys.stdout.write(rendered)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capprobe",
        description="Caption-recovery probing for single-vector text encoders.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out-dir", default=None,
                       help=f"output directory (default: ${OUT_DIR_ENV} or '.')")
        p.add_argument("--config", default=None,
                       help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("gen", help="generate a typed prompt corpus")
    common(p)
    p.add_argument("--vocab", default=None, help="vocabulary file (default: bundled)")
    p.add_argument("--per-type", type=int, default=500)
    p.add_argument("--per-type-override", action="append", metavar="CELL=N")
    p.add_argument("--out", default="corpus.jsonl")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("autoenc", help="train the pooled autoencoder encoder")
    common(p)
    _add_train_flags(p)
    p.add_argument("--vocab", default=None)
    p.add_argument("--train-corpus", required=True)
    p.add_argument("--out", default="encoder.ckpt")
    p.set_defaults(func=cmd_autoenc)

    p = sub.add_parser("probe", help="train a probe, decode, and report")
    common(p)
    _add_train_flags(p)
    p.add_argument("--vocab", default=None)
    p.add_argument("--encoder", required=True,
                   help="bow | bow-pos | pooled-autoenc | pooled:CKPT | file:TABLE")
    p.add_argument("--encoder-dim", type=int, default=256)
    p.add_argument("--shuffle", action=argparse.BooleanOptionalAction, default=False,
                   help="apply a fixed dimension shuffle to the encoder")
    p.add_argument("--shuffle-seed", type=int, default=0)
    p.add_argument("--train-corpus", required=True)
    p.add_argument("--eval-corpus", required=True)
    p.add_argument("--eval-embeddings", default=None)
    p.add_argument("--out-prefix", default="probe")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("decode", help="decode a corpus with a saved checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--eval-corpus", required=True)
    p.add_argument("--encoder", default=None)
    p.add_argument("--eval-embeddings", default=None)
    p.add_argument("--shuffle", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--shuffle-seed", type=int, default=0)
    p.add_argument("--beam", type=int, default=None)
    p.add_argument("--out", default="decodes.jsonl")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval-text", help="stratified EM/BLEU/Shuffled%% report")
    common(p)
    p.add_argument("--decodes", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=["json", "md", "csv"], default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval_text)

    p = sub.add_parser("eval-mm", help="image/caption matching report")
    common(p)
    p.add_argument("--pairs", required=True)
    p.add_argument("--compare", default=None,
                   help="second score file: paired Wilcoxon comparison")
    p.add_argument("--relaxed", action="store_true",
                   help="per-image-average scores instead of the strict scheme")
    p.add_argument("--format", choices=["json", "md"], default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval_mm)

    p = sub.add_parser("report", help="render a saved report as markdown or csv")
    common(p)
    p.add_argument("--report", required=True)
    p.add_argument("--format", choices=["md", "csv"], default="md")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def _merge_config(argv: list[str], parser: argparse.ArgumentParser) -> argparse.Namespace:
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config", default=None)
    known, _ = probe.parse_known_args(argv)
    if known.config:
        config = json.loads(Path(known.config).read_text(encoding="utf-8"))
        if not isinstance(config, dict):
            raise CliError(f"config file {known.config} must hold a JSON object")
        for action in parser._subparsers._group_actions[0].choices.values():  # type: ignore[union-attr]
            valid = {a.dest for a in action._actions}
            action.set_defaults(**{k: v for k, v in config.items() if k in valid})
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _merge_config(argv, parser)
        return args.func(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code
    except USER_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (NumericError, ArithmeticError) as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
