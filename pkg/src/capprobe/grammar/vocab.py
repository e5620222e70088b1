"""Closed lexicon backing the caption grammar.

The vocabulary ships as a plain-text file, one ``category<TAB>word`` entry
per line.  An entry may carry a ``synonym_of=<word>`` annotation; annotated
words are dropped at load time when their target is present, so no two
retained nouns are synonyms of each other.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

__all__ = [
    "Vocabulary",
    "VocabSchemaError",
    "VocabValidationError",
    "load_vocabulary",
    "bundled_vocabulary_path",
    "NUMERAL_COUNTS",
]

# Closed numeral lexicon: number word -> count.
NUMERAL_COUNTS = {"two": 2, "three": 3, "four": 4, "five": 5}

_CATEGORIES = (
    "noun",
    "adjective",
    "intransitive_verb",
    "transitive_verb",
    "spatial_intransitive",
    "spatial_transitive",
    "temporal",
    "numeral",
)

_VOWELS = "aeiou"


class VocabSchemaError(ValueError):
    """Raised for malformed vocabulary files; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class VocabValidationError(ValueError):
    """Raised when a structurally valid file violates a vocabulary invariant."""


def article_for(word: str) -> str:
    """Indefinite article selected by the vowel rule on the word's first letter."""
    return "an" if word[:1].lower() in _VOWELS else "a"


def pluralize(lemma: str) -> str:
    if lemma.endswith("man"):
        return lemma[:-3] + "men"
    if lemma.endswith(("s", "x", "z", "ch", "sh")):
        return lemma + "es"
    if lemma.endswith("y") and len(lemma) > 1 and lemma[-2] not in _VOWELS:
        return lemma[:-1] + "ies"
    return lemma + "s"


@dataclass(frozen=True)
class Vocabulary:
    """Immutable word lists, one per grammatical category.

    Nouns are stored as (lemma, article) pairs; numerals as (word, count)
    pairs.  Spatial entries are multi-word phrases.
    """

    nouns: tuple[tuple[str, str], ...]
    adjectives: tuple[str, ...]
    intransitive_verbs: tuple[str, ...]
    transitive_verbs: tuple[str, ...]
    spatial_intransitive: tuple[str, ...]
    spatial_transitive: tuple[str, ...]
    temporal: tuple[str, ...]
    numerals: tuple[tuple[str, int], ...]
    plural_to_lemma: dict[str, str] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        for name in (
            "nouns",
            "adjectives",
            "intransitive_verbs",
            "transitive_verbs",
            "spatial_intransitive",
            "spatial_transitive",
            "temporal",
            "numerals",
        ):
            if not getattr(self, name):
                raise VocabValidationError(f"category {name!r} is empty")
        seen: dict[str, str] = {}
        for cat, words in (
            ("noun", [n for n, _ in self.nouns]),
            ("adjective", self.adjectives),
            ("intransitive_verb", self.intransitive_verbs),
            ("transitive_verb", self.transitive_verbs),
            ("spatial_intransitive", self.spatial_intransitive),
            ("spatial_transitive", self.spatial_transitive),
            ("temporal", self.temporal),
            ("numeral", [w for w, _ in self.numerals]),
        ):
            for w in words:
                if w in seen and seen[w] != cat:
                    raise VocabValidationError(
                        f"word {w!r} appears in both {seen[w]!r} and {cat!r}"
                    )
                if w in seen:
                    raise VocabValidationError(f"duplicate word {w!r} in {cat!r}")
                seen[w] = cat
        object.__setattr__(
            self,
            "plural_to_lemma",
            {pluralize(lemma): lemma for lemma, _ in self.nouns},
        )

    @property
    def noun_lemmas(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.nouns)

    def all_surface_words(self) -> set[str]:
        """Every word that can appear in a realized caption."""
        words: set[str] = {"a", "an", "and", "that", "is", "not"}
        for lemma, art in self.nouns:
            words.add(lemma)
            words.add(pluralize(lemma))
            words.add(art)
        words.update(self.adjectives)
        words.update(self.intransitive_verbs)
        words.update(self.transitive_verbs)
        for phrase in self.spatial_intransitive + self.spatial_transitive:
            words.update(phrase.split())
        words.update(self.temporal)
        words.update(w for w, _ in self.numerals)
        return words


def _parse_line(raw: str, lineno: int) -> tuple[str, str, str | None] | None:
    line = raw.rstrip("\n")
    if not line.strip() or line.lstrip().startswith("#"):
        return None
    parts = line.split("\t")
    if len(parts) not in (2, 3):
        raise VocabSchemaError(
            f"expected 'category<TAB>word[<TAB>synonym_of=w]', got {line!r}", lineno
        )
    category, word = parts[0].strip(), parts[1].strip()
    if category not in _CATEGORIES:
        raise VocabSchemaError(f"unknown category {category!r}", lineno)
    if not word:
        raise VocabSchemaError("empty word", lineno)
    synonym_of = None
    if len(parts) == 3:
        annot = parts[2].strip()
        if not annot.startswith("synonym_of="):
            raise VocabSchemaError(f"unknown annotation {annot!r}", lineno)
        synonym_of = annot.split("=", 1)[1].strip()
        if not synonym_of:
            raise VocabSchemaError("empty synonym_of target", lineno)
    return category, word, synonym_of


def load_vocabulary(path: str | Path) -> Vocabulary:
    """Load and validate a vocabulary file.

    Synonym-annotated words are dropped when their target word exists in the
    same category, leaving a single representative per synonym pair.
    """
    path = Path(path)
    entries: list[tuple[str, str, str | None]] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parsed = _parse_line(raw, lineno)
            if parsed is not None:
                entries.append(parsed)

    by_cat: dict[str, list[str]] = {c: [] for c in _CATEGORIES}
    present = {(cat, word) for cat, word, _ in entries}
    for cat, word, synonym_of in entries:
        if synonym_of is not None and (cat, synonym_of) in present:
            continue
        if word not in by_cat[cat]:
            by_cat[cat].append(word)

    numerals = []
    for word in by_cat["numeral"]:
        if word not in NUMERAL_COUNTS:
            raise VocabValidationError(f"numeral {word!r} has no known count")
        numerals.append((word, NUMERAL_COUNTS[word]))

    return Vocabulary(
        nouns=tuple((n, article_for(n)) for n in by_cat["noun"]),
        adjectives=tuple(by_cat["adjective"]),
        intransitive_verbs=tuple(by_cat["intransitive_verb"]),
        transitive_verbs=tuple(by_cat["transitive_verb"]),
        spatial_intransitive=tuple(by_cat["spatial_intransitive"]),
        spatial_transitive=tuple(by_cat["spatial_transitive"]),
        temporal=tuple(by_cat["temporal"]),
        numerals=tuple(numerals),
    )


def bundled_vocabulary_path() -> Path:
    """Path of the vocabulary file shipped with the package."""
    return Path(importlib.resources.files("capprobe").joinpath("data/vocabulary.tsv"))


def make_vocabulary(
    nouns: Iterable[str],
    adjectives: Iterable[str],
    intransitive_verbs: Iterable[str],
    transitive_verbs: Iterable[str],
    spatial_intransitive: Iterable[str] = ("on the left", "on the right"),
    spatial_transitive: Iterable[str] = ("to the left of", "to the right of"),
    temporal: Iterable[str] = ("before", "after"),
    numerals: Iterable[str] = ("two", "three", "four", "five"),
) -> Vocabulary:
    """Convenience constructor used by tests and programmatic callers."""
    return Vocabulary(
        nouns=tuple((n, article_for(n)) for n in nouns),
        adjectives=tuple(adjectives),
        intransitive_verbs=tuple(intransitive_verbs),
        transitive_verbs=tuple(transitive_verbs),
        spatial_intransitive=tuple(spatial_intransitive),
        spatial_transitive=tuple(spatial_transitive),
        temporal=tuple(temporal),
        numerals=tuple((w, NUMERAL_COUNTS[w]) for w in numerals),
    )
