"""Corpus generation, swap variants, and the corpus JSONL format."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .cells import (
    ALL_CELLS,
    AttributeKind,
    BoundAttribute,
    PromptSpec,
    cell_capacity,
    parse_type_key,
)
from .realize import realize
from .vocab import Vocabulary

__all__ = [
    "Prompt",
    "CapacityError",
    "generate_corpus",
    "swap_variant",
    "write_corpus",
    "read_corpus",
]

_K = AttributeKind


class CapacityError(ValueError):
    def __init__(self, cell: str, requested: int, capacity: int):
        super().__init__(
            f"cell {cell!r} can realize at most {capacity} distinct prompts, "
            f"{requested} requested"
        )
        self.cell = cell


@dataclass(frozen=True)
class Prompt:
    id: str
    text: str
    spec: PromptSpec
    type_key: str
    order_sensitive: bool

    def to_json(self) -> dict:
        attrs = []
        for a in self.spec.attributes:
            entry = {"kind": a.kind.value, "word": a.word, "object": a.object_index}
            if a.temporal is not None:
                entry["temporal"] = a.temporal
            attrs.append(entry)
        return {
            "id": self.id,
            "text": self.text,
            "type_key": self.type_key,
            "n_objects": self.spec.n_objects,
            "attributes": attrs,
            "multiples": list(self.spec.multiples) if self.spec.multiples else None,
            "negation": self.spec.negation,
            "order_sensitive": self.order_sensitive,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Prompt":
        attrs = tuple(
            BoundAttribute(
                kind=AttributeKind(a["kind"]),
                word=a["word"],
                object_index=a["object"],
                temporal=a.get("temporal"),
            )
            for a in obj["attributes"]
        )
        nouns = obj.get("nouns")
        spec = PromptSpec(
            n_objects=obj["n_objects"],
            nouns=tuple(nouns) if nouns else _nouns_from_text(obj),
            attributes=attrs,
            multiples=tuple(obj["multiples"]) if obj.get("multiples") else None,
            negation=obj["negation"],
        )
        return cls(
            id=obj["id"],
            text=obj["text"],
            spec=spec,
            type_key=obj["type_key"],
            order_sensitive=obj["order_sensitive"],
        )


def _nouns_from_text(obj: dict) -> tuple[str, ...]:
    raise ValueError(f"corpus record {obj.get('id')!r} is missing its noun bindings")


def _swapped_spec(spec: PromptSpec) -> PromptSpec | None:
    """Companion spec with the two order-sensitive items exchanged."""
    if spec.n_objects != 2:
        return None
    if spec.connector is not None:
        swapped = PromptSpec(
            n_objects=2,
            nouns=(spec.nouns[1], spec.nouns[0]),
            attributes=spec.attributes,
            multiples=spec.multiples,
            negation=spec.negation,
        )
    else:
        attrs = tuple(
            BoundAttribute(a.kind, a.word, 1 - a.object_index, temporal=a.temporal)
            for a in spec.attributes
        )
        multiples = (
            (spec.multiples[1], spec.multiples[0]) if spec.multiples else None
        )
        swapped = PromptSpec(
            n_objects=2,
            nouns=spec.nouns,
            attributes=attrs,
            multiples=multiples,
            negation=spec.negation,
        )
    if swapped == spec:
        return None
    return swapped


def swap_variant(prompt: Prompt) -> Prompt | None:
    """The companion prompt with exchanged bindings, or None when the
    exchange is an identity (order-insensitive prompts)."""
    swapped = _swapped_spec(prompt.spec)
    if swapped is None:
        return None
    text = realize(swapped)
    if text == prompt.text:
        return None
    return Prompt(
        id=prompt.id + "~swap",
        text=text,
        spec=swapped,
        type_key=swapped.type_key,
        order_sensitive=True,
    )


def _distinct_pair(rng: random.Random, items):
    a = rng.choice(items)
    b = rng.choice(items)
    while b == a:
        b = rng.choice(items)
    return a, b


def _sample_spec(type_key: str, vocab: Vocabulary, rng: random.Random) -> PromptSpec:
    n_obj, kinds, mult, neg = parse_type_key(type_key)
    lemmas = list(vocab.noun_lemmas)
    if n_obj == 1:
        nouns = (rng.choice(lemmas),)
    else:
        nouns = _distinct_pair(rng, lemmas)

    multiples = None
    if mult:
        words = [w for w, _ in vocab.numerals]
        if n_obj == 1:
            multiples = (rng.choice(words),)
        else:
            multiples = _distinct_pair(rng, words)

    def slot() -> int:
        return rng.randrange(2) if n_obj == 2 else 0

    attrs: list[BoundAttribute] = []
    if len(kinds) == 2 and kinds[0] == kinds[1]:
        pool = {
            _K.ADJECTIVE: vocab.adjectives,
            _K.SPATIAL_1OBJ: vocab.spatial_intransitive,
            _K.VERB_1OBJ: vocab.intransitive_verbs,
        }[kinds[0]]
        w0, w1 = _distinct_pair(rng, list(pool))
        if n_obj == 1:
            attrs = [BoundAttribute(kinds[0], w0, 0), BoundAttribute(kinds[0], w1, 0)]
        else:
            attrs = [BoundAttribute(kinds[0], w0, 0), BoundAttribute(kinds[0], w1, 1)]
    else:
        for kind in kinds:
            if kind is _K.ADJECTIVE:
                attrs.append(BoundAttribute(kind, rng.choice(vocab.adjectives), slot()))
            elif kind is _K.SPATIAL_1OBJ:
                attrs.append(
                    BoundAttribute(kind, rng.choice(vocab.spatial_intransitive), slot())
                )
            elif kind is _K.SPATIAL_2OBJ:
                attrs.append(
                    BoundAttribute(kind, rng.choice(vocab.spatial_transitive), 0)
                )
            elif kind is _K.VERB_1OBJ:
                attrs.append(
                    BoundAttribute(kind, rng.choice(vocab.intransitive_verbs), slot())
                )
            elif kind is _K.VERB_2OBJ:
                attrs.append(
                    BoundAttribute(kind, rng.choice(vocab.transitive_verbs), 0)
                )
            elif kind is _K.TEMPORAL_VERB_1OBJ:
                attrs.append(
                    BoundAttribute(
                        kind,
                        rng.choice(vocab.intransitive_verbs),
                        slot(),
                        temporal=rng.choice(vocab.temporal),
                    )
                )
            elif kind is _K.TEMPORAL_VERB_2OBJ:
                attrs.append(
                    BoundAttribute(
                        kind,
                        rng.choice(vocab.transitive_verbs),
                        0,
                        temporal=rng.choice(vocab.temporal),
                    )
                )

    return PromptSpec(
        n_objects=n_obj,
        nouns=nouns,
        attributes=tuple(attrs),
        multiples=multiples,
        negation=neg,
    )


def generate_corpus(
    vocab: Vocabulary,
    per_type: int,
    seed: int,
    per_type_overrides: dict[str, int] | None = None,
) -> list[Prompt]:
    """Generate ``per_type`` distinct prompts for each of the 36 cells.

    Deterministic for a fixed (vocab, per_type, seed): cells are filled in a
    fixed order from a single seeded stream, rejection-sampling duplicate
    surface strings.
    """
    if per_type < 1:
        raise ValueError("per_type must be >= 1")
    overrides = per_type_overrides or {}
    unknown = set(overrides) - set(ALL_CELLS)
    if unknown:
        raise ValueError(f"unknown cells in overrides: {sorted(unknown)}")

    rng = random.Random(seed)
    prompts: list[Prompt] = []
    index = 0
    for cell in ALL_CELLS:
        want = overrides.get(cell, per_type)
        capacity = cell_capacity(cell, vocab)
        if want > capacity:
            raise CapacityError(cell, want, capacity)
        seen: set[str] = set()
        stall = 0
        while len(seen) < want:
            spec = _sample_spec(cell, vocab, rng)
            text = realize(spec)
            if text in seen:
                stall += 1
                if stall > 1000 * want + 10_000:
                    raise CapacityError(cell, want, len(seen))
                continue
            stall = 0
            seen.add(text)
            swapped = _swapped_spec(spec)
            sensitive = swapped is not None and realize(swapped) != text
            prompts.append(Prompt(f"cp-{index:06d}", text, spec, cell, sensitive))
            index += 1
    return prompts


def write_corpus(prompts: list[Prompt], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for p in prompts:
            record = p.to_json()
            record["nouns"] = list(p.spec.nouns)
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_corpus(path: str | Path) -> list[Prompt]:
    path = Path(path)
    prompts = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                prompts.append(Prompt.from_json(json.loads(line)))
            except (KeyError, ValueError) as err:
                raise ValueError(f"{path}:{lineno}: bad corpus record: {err}") from err
    return prompts
