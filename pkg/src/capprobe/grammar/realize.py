"""Surface realization: one fixed template per cell.

The realizer is deterministic; a bound spec always renders to exactly one
string, so exact-match evaluation has a single canonical reference form.
"""

from __future__ import annotations

from .cells import AttributeKind, PromptSpec
from .vocab import article_for, pluralize

__all__ = ["realize"]

_K = AttributeKind


def _bare_np(spec: PromptSpec, obj: int) -> list[str]:
    noun = spec.nouns[obj]
    return [article_for(noun), noun]


def _noun_phrase(spec: PromptSpec, obj: int) -> list[str]:
    """``[numeral|article] [adj [and adj]] noun [spatial] [[temporal] verb]``"""
    attrs = spec.attributes_on(obj)
    adjectives = [a.word for a in attrs if a.kind is _K.ADJECTIVE]
    spatials = [a.word for a in attrs if a.kind is _K.SPATIAL_1OBJ]
    verbs = [a for a in attrs if a.kind in (_K.VERB_1OBJ, _K.TEMPORAL_VERB_1OBJ)]

    noun = spec.nouns[obj]
    numeral = spec.multiples[obj] if spec.multiples is not None else None

    tokens: list[str] = []
    if numeral is not None:
        tokens.append(numeral)
    else:
        first = adjectives[0] if adjectives else noun
        tokens.append(article_for(first))
    if adjectives:
        tokens.append(adjectives[0])
        if len(adjectives) == 2:
            tokens.extend(["and", adjectives[1]])
    tokens.append(pluralize(noun) if numeral is not None else noun)
    for phrase in spatials:
        tokens.extend(phrase.split())
    for v in verbs:
        if v.temporal is not None:
            tokens.append(v.temporal)
        tokens.append(v.word)
    return tokens


def realize(spec: PromptSpec) -> str:
    """Render a bound spec to its canonical caption string."""
    if spec.negation:
        attr = spec.attributes[0]
        tokens = _bare_np(spec, 0) + ["that", "is", "not"]
        if attr.kind in (_K.SPATIAL_1OBJ, _K.SPATIAL_2OBJ):
            tokens.extend(attr.word.split())
        else:
            tokens.append(attr.word)
        if attr.kind.is_connector:
            tokens.extend(_bare_np(spec, 1))
        return " ".join(tokens)

    if spec.n_objects == 1:
        return " ".join(_noun_phrase(spec, 0))

    connector = spec.connector
    tokens = _noun_phrase(spec, 0)
    if connector is None:
        tokens.append("and")
    elif connector.kind is _K.SPATIAL_2OBJ:
        tokens.extend(connector.word.split())
    else:
        if connector.temporal is not None:
            tokens.append(connector.temporal)
        tokens.append(connector.word)
    tokens.extend(_noun_phrase(spec, 1))
    return " ".join(tokens)
