"""Round-trip parser for realized captions.

Parsing recovers the unique bound spec whose realization equals the input
text.  Over a synonym-free, category-disjoint vocabulary every generated
caption has exactly one parse; anything else raises ``ParseError`` carrying
the furthest token position that still matched.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cells import AttributeKind, BoundAttribute, PromptSpec, SpecError
from .vocab import Vocabulary, article_for

__all__ = ["parse", "ParseError", "AmbiguityError"]

_K = AttributeKind


class ParseError(ValueError):
    def __init__(self, message: str, position: int = 0):
        super().__init__(f"{message} (at token {position})")
        self.position = position


class AmbiguityError(ParseError):
    """Text admits more than one structural reading."""


@dataclass
class _NP:
    noun: str
    numeral: str | None
    adjectives: list[str]
    spatials: list[str]
    verbs: list[tuple[str | None, str]]  # (temporal, gerund)

    def attributes(self, obj: int) -> list[BoundAttribute]:
        out = [BoundAttribute(_K.ADJECTIVE, w, obj) for w in self.adjectives]
        out += [BoundAttribute(_K.SPATIAL_1OBJ, w, obj) for w in self.spatials]
        for temporal, verb in self.verbs:
            if temporal is None:
                out.append(BoundAttribute(_K.VERB_1OBJ, verb, obj))
            else:
                out.append(
                    BoundAttribute(_K.TEMPORAL_VERB_1OBJ, verb, obj, temporal=temporal)
                )
        return out


class _Parser:
    def __init__(self, tokens: list[str], vocab: Vocabulary, origin: int = 0):
        self.tokens = tokens
        self.vocab = vocab
        self.origin = origin
        self.nouns = set(vocab.noun_lemmas)
        self.adjs = set(vocab.adjectives)
        self.iverbs = set(vocab.intransitive_verbs)
        self.numerals = {w for w, _ in vocab.numerals}
        self.temporals = set(vocab.temporal)

    def fail(self, pos: int, message: str):
        raise ParseError(message, self.origin + pos)

    def _match_phrase(self, pos: int, phrases) -> str | None:
        for phrase in phrases:
            words = phrase.split()
            if self.tokens[pos : pos + len(words)] == words:
                return phrase
        return None

    def parse_np(self) -> _NP:
        toks = self.tokens
        if not toks:
            self.fail(0, "empty noun phrase")
        pos = 0
        numeral = None
        article = None
        if toks[0] in self.numerals:
            numeral = toks[0]
        elif toks[0] in ("a", "an"):
            article = toks[0]
        else:
            self.fail(0, f"expected article or numeral, got {toks[0]!r}")
        pos = 1

        adjectives: list[str] = []
        if pos < len(toks) and toks[pos] in self.adjs:
            adjectives.append(toks[pos])
            pos += 1
            if (
                pos + 1 < len(toks)
                and toks[pos] == "and"
                and toks[pos + 1] in self.adjs
            ):
                adjectives.append(toks[pos + 1])
                pos += 2

        if pos >= len(toks):
            self.fail(pos, "expected a noun")
        word = toks[pos]
        if numeral is not None:
            if word not in self.vocab.plural_to_lemma:
                self.fail(pos, f"expected a plural noun, got {word!r}")
            noun = self.vocab.plural_to_lemma[word]
        else:
            if word not in self.nouns:
                self.fail(pos, f"expected a noun, got {word!r}")
            noun = word
            expected = article_for(adjectives[0] if adjectives else noun)
            if article != expected:
                self.fail(0, f"article {article!r} does not agree with {word!r}")
        pos += 1

        spatials: list[str] = []
        while pos < len(toks):
            phrase = self._match_phrase(pos, self.vocab.spatial_intransitive)
            if phrase is None:
                break
            spatials.append(phrase)
            pos += len(phrase.split())

        verbs: list[tuple[str | None, str]] = []
        while pos < len(toks):
            temporal = None
            p = pos
            if toks[p] in self.temporals:
                temporal = toks[p]
                p += 1
            if p < len(toks) and toks[p] in self.iverbs:
                verbs.append((temporal, toks[p]))
                pos = p + 1
            else:
                break

        if pos != len(toks):
            self.fail(pos, f"unexpected token {toks[pos]!r}")
        return _NP(noun, numeral, adjectives, spatials, verbs)


def _try(interps, furthest, builder):
    try:
        interps.append(builder())
    except ParseError as err:
        furthest[0] = max(furthest[0], err.position)
    except SpecError:
        pass


def _one_object(vocab: Vocabulary, tokens: list[str]) -> PromptSpec:
    np0 = _Parser(tokens, vocab).parse_np()
    return PromptSpec(
        1,
        (np0.noun,),
        tuple(np0.attributes(0)),
        multiples=(np0.numeral,) if np0.numeral else None,
    )


def _two_object(vocab, left, right, connector, origin_right) -> PromptSpec:
    np0 = _Parser(left, vocab).parse_np()
    np1 = _Parser(right, vocab, origin=origin_right).parse_np()
    attrs = np0.attributes(0) + np1.attributes(1)
    if connector is not None:
        attrs.append(connector)
    multiples = None
    if np0.numeral or np1.numeral:
        multiples = (np0.numeral, np1.numeral)
    return PromptSpec(
        n_objects=2,
        nouns=(np0.noun, np1.noun),
        attributes=tuple(attrs),
        multiples=multiples,
    )


def _parse_negation(tokens: list[str], i: int, vocab: Vocabulary) -> PromptSpec:
    head, rest = tokens[:i], tokens[i + 3 :]
    origin = i + 3
    np0 = _Parser(head, vocab).parse_np()
    if np0.numeral or np0.adjectives or np0.spatials or np0.verbs:
        raise ParseError("negated prompts take a bare noun phrase", 1)
    if not rest:
        raise ParseError("nothing after negation", origin)

    parser = _Parser(rest, vocab, origin=origin)
    if rest[0] in parser.adjs and len(rest) == 1:
        attr = BoundAttribute(_K.ADJECTIVE, rest[0], 0)
        return PromptSpec(1, (np0.noun,), (attr,), negation=True)
    if rest[0] in parser.iverbs and len(rest) == 1:
        attr = BoundAttribute(_K.VERB_1OBJ, rest[0], 0)
        return PromptSpec(1, (np0.noun,), (attr,), negation=True)
    phrase = parser._match_phrase(0, vocab.spatial_intransitive)
    if phrase is not None and len(rest) == len(phrase.split()):
        attr = BoundAttribute(_K.SPATIAL_1OBJ, phrase, 0)
        return PromptSpec(1, (np0.noun,), (attr,), negation=True)
    phrase = parser._match_phrase(0, vocab.spatial_transitive)
    if phrase is not None:
        n = len(phrase.split())
        np1 = _Parser(rest[n:], vocab, origin=origin + n).parse_np()
        attr = BoundAttribute(_K.SPATIAL_2OBJ, phrase, 0)
        return PromptSpec(
            2, (np0.noun, np1.noun), (attr,), negation=True
        )
    if rest[0] in set(vocab.transitive_verbs):
        np1 = _Parser(rest[1:], vocab, origin=origin + 1).parse_np()
        attr = BoundAttribute(_K.VERB_2OBJ, rest[0], 0)
        return PromptSpec(2, (np0.noun, np1.noun), (attr,), negation=True)
    raise ParseError(f"cannot negate {rest[0]!r}", origin)


def parse(text: str, vocab: Vocabulary) -> PromptSpec:
    """Parse a caption back to its bound spec (inverse of ``realize``)."""
    tokens = text.strip().split()
    if not tokens:
        raise ParseError("empty text", 0)

    for i in range(len(tokens) - 2):
        if tokens[i : i + 3] == ["that", "is", "not"]:
            return _parse_negation(tokens, i, vocab)

    interps: list[PromptSpec] = []
    furthest = [0]

    _try(interps, furthest, lambda: _one_object(vocab, tokens))

    tverbs = set(vocab.transitive_verbs)
    temporals = set(vocab.temporal)
    for i, tok in enumerate(tokens):
        if tok == "and":
            _try(
                interps,
                furthest,
                lambda i=i: _two_object(
                    vocab, tokens[:i], tokens[i + 1 :], None, i + 1
                ),
            )
        if tok in tverbs:
            temporal = tokens[i - 1] if i > 0 and tokens[i - 1] in temporals else None
            left_end = i - 1 if temporal else i
            kind = _K.TEMPORAL_VERB_2OBJ if temporal else _K.VERB_2OBJ
            conn = BoundAttribute(kind, tok, 0, temporal=temporal)
            _try(
                interps,
                furthest,
                lambda i=i, left_end=left_end, conn=conn: _two_object(
                    vocab, tokens[:left_end], tokens[i + 1 :], conn, i + 1
                ),
            )
    matcher = _Parser(tokens, vocab)
    for i in range(len(tokens)):
        phrase = matcher._match_phrase(i, vocab.spatial_transitive)
        if phrase is not None:
            n = len(phrase.split())
            conn = BoundAttribute(_K.SPATIAL_2OBJ, phrase, 0)
            _try(
                interps,
                furthest,
                lambda i=i, n=n, conn=conn: _two_object(
                    vocab, tokens[:i], tokens[i + n :], conn, i + n
                ),
            )

    unique = []
    for spec in interps:
        if spec not in unique:
            unique.append(spec)
    if not unique:
        raise ParseError("no valid reading", furthest[0])
    if len(unique) > 1:
        raise AmbiguityError(f"{len(unique)} valid readings", furthest[0])
    return unique[0]
