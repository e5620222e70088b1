"""Prompt structure types and the populated prompt-type grid.

A prompt describes one or two objects, zero to two attributes, and optionally
numeral multiples or a negation.  Each legal combination of object count,
attribute kinds, multiples and negation is one *cell*; the grid below has
exactly 36 populated cells (9 one-object, 15 two-object, 7 multiples,
5 negation).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .vocab import Vocabulary

__all__ = [
    "AttributeKind",
    "BoundAttribute",
    "PromptSpec",
    "SpecError",
    "ALL_CELLS",
    "ONE_OBJECT_CELLS",
    "TWO_OBJECT_CELLS",
    "MULTIPLES_CELLS",
    "NEGATION_CELLS",
    "type_key_of",
    "cell_capacity",
    "is_mult_cell",
    "is_neg_cell",
]


class AttributeKind(enum.Enum):
    ADJECTIVE = "adj"
    SPATIAL_1OBJ = "sp1"
    SPATIAL_2OBJ = "sp2"
    VERB_1OBJ = "v1"
    VERB_2OBJ = "v2"
    TEMPORAL_VERB_1OBJ = "tv1"
    TEMPORAL_VERB_2OBJ = "tv2"

    @property
    def is_connector(self) -> bool:
        """Connector kinds relate the two objects of a two-object prompt."""
        return self in (
            AttributeKind.SPATIAL_2OBJ,
            AttributeKind.VERB_2OBJ,
            AttributeKind.TEMPORAL_VERB_2OBJ,
        )

    @property
    def is_temporal(self) -> bool:
        return self in (
            AttributeKind.TEMPORAL_VERB_1OBJ,
            AttributeKind.TEMPORAL_VERB_2OBJ,
        )


_KIND_ORDER = {k: i for i, k in enumerate(AttributeKind)}


class SpecError(ValueError):
    """Raised when a prompt specification violates a structural invariant."""


@dataclass(frozen=True)
class BoundAttribute:
    """One attribute choice bound to an object slot.

    ``word`` is the lexical choice (adjective, verb gerund, or spatial
    phrase); temporal kinds additionally carry the temporal word that
    precedes the verb.
    """

    kind: AttributeKind
    word: str
    object_index: int = 0
    temporal: str | None = None

    def __post_init__(self):
        if self.kind.is_temporal and not self.temporal:
            raise SpecError(f"{self.kind.value} attribute requires a temporal word")
        if not self.kind.is_temporal and self.temporal is not None:
            raise SpecError(f"{self.kind.value} attribute cannot carry a temporal word")
        if self.object_index not in (0, 1):
            raise SpecError(f"object index {self.object_index} out of range")


@dataclass(frozen=True)
class PromptSpec:
    """A fully bound prompt: nouns, attributes, multiples, negation.

    Attributes are kept in canonical order (object index, then kind); two
    same-kind attributes on one object keep their given order, which is the
    surface order.
    """

    n_objects: int
    nouns: tuple[str, ...]
    attributes: tuple[BoundAttribute, ...] = ()
    multiples: tuple[str | None, ...] | None = None
    negation: bool = False

    def __post_init__(self):
        if self.n_objects not in (1, 2):
            raise SpecError(f"n_objects must be 1 or 2, got {self.n_objects}")
        if len(self.nouns) != self.n_objects:
            raise SpecError("one noun required per object")
        if self.n_objects == 2 and self.nouns[0] == self.nouns[1]:
            raise SpecError("two-object prompts require distinct nouns")
        if len(self.attributes) > 2:
            raise SpecError("at most two attributes")
        ordered = tuple(
            sorted(
                self.attributes,
                key=lambda a: (a.object_index, _KIND_ORDER[a.kind]),
            )
        )
        object.__setattr__(self, "attributes", ordered)
        for a in self.attributes:
            if a.object_index >= self.n_objects:
                raise SpecError("attribute bound to a missing object")
            if a.kind.is_connector and self.n_objects != 2:
                raise SpecError(f"{a.kind.value} requires a two-object prompt")
        if sum(a.kind.is_connector for a in self.attributes) > 1:
            raise SpecError("at most one connector attribute")
        if self.multiples is not None:
            if len(self.multiples) != self.n_objects:
                raise SpecError("one multiples slot per object")
            if all(m is None for m in self.multiples):
                object.__setattr__(self, "multiples", None)
        if self.negation:
            if self.has_multiples:
                raise SpecError("multiples and negation never co-occur")
            if len(self.attributes) != 1:
                raise SpecError("negation requires exactly one attribute")
        if self.type_key not in ALL_CELLS:
            raise SpecError(f"attribute combination {self.type_key!r} is not a populated cell")

    @property
    def has_multiples(self) -> bool:
        return self.multiples is not None and any(m for m in self.multiples)

    @property
    def connector(self) -> BoundAttribute | None:
        for a in self.attributes:
            if a.kind.is_connector:
                return a
        return None

    def attributes_on(self, object_index: int) -> tuple[BoundAttribute, ...]:
        """Non-connector attributes bound to one object, in surface order."""
        return tuple(
            a
            for a in self.attributes
            if a.object_index == object_index and not a.kind.is_connector
        )

    @property
    def type_key(self) -> str:
        return type_key_of(
            self.n_objects,
            [a.kind for a in self.attributes],
            mult=self.has_multiples,
            neg=self.negation,
        )


def type_key_of(
    n_objects: int,
    kinds: list[AttributeKind] | tuple[AttributeKind, ...],
    *,
    mult: bool = False,
    neg: bool = False,
) -> str:
    suffix = "_mult" if mult else "_neg" if neg else ""
    if kinds:
        attrs = "+".join(k.value for k in sorted(kinds, key=_KIND_ORDER.get))
    else:
        attrs = "none"
    return f"{n_objects}obj{suffix}:{attrs}"


def _keys(n: int, combos: list[list[AttributeKind]], *, mult=False, neg=False) -> tuple[str, ...]:
    return tuple(type_key_of(n, c, mult=mult, neg=neg) for c in combos)


_K = AttributeKind

ONE_OBJECT_CELLS = _keys(
    1,
    [
        [],
        [_K.ADJECTIVE],
        [_K.SPATIAL_1OBJ],
        [_K.VERB_1OBJ],
        [_K.ADJECTIVE, _K.ADJECTIVE],
        [_K.ADJECTIVE, _K.SPATIAL_1OBJ],
        [_K.ADJECTIVE, _K.VERB_1OBJ],
        [_K.SPATIAL_1OBJ, _K.VERB_1OBJ],
        [_K.TEMPORAL_VERB_1OBJ],
    ],
)

TWO_OBJECT_CELLS = _keys(
    2,
    [
        [],
        [_K.ADJECTIVE],
        [_K.SPATIAL_2OBJ],
        [_K.VERB_1OBJ],
        [_K.VERB_2OBJ],
        [_K.ADJECTIVE, _K.ADJECTIVE],
        [_K.ADJECTIVE, _K.SPATIAL_2OBJ],
        [_K.ADJECTIVE, _K.VERB_1OBJ],
        [_K.ADJECTIVE, _K.VERB_2OBJ],
        [_K.SPATIAL_2OBJ, _K.VERB_1OBJ],
        [_K.SPATIAL_1OBJ, _K.VERB_2OBJ],
        [_K.SPATIAL_1OBJ, _K.SPATIAL_1OBJ],
        [_K.TEMPORAL_VERB_1OBJ],
        [_K.TEMPORAL_VERB_2OBJ],
        [_K.VERB_1OBJ, _K.VERB_1OBJ],
    ],
)

MULTIPLES_CELLS = _keys(
    1,
    [[], [_K.ADJECTIVE], [_K.SPATIAL_1OBJ], [_K.VERB_1OBJ]],
    mult=True,
) + _keys(
    2,
    [[], [_K.SPATIAL_2OBJ], [_K.VERB_2OBJ]],
    mult=True,
)

NEGATION_CELLS = _keys(
    1,
    [[_K.ADJECTIVE], [_K.SPATIAL_1OBJ], [_K.VERB_1OBJ]],
    neg=True,
) + _keys(
    2,
    [[_K.SPATIAL_2OBJ], [_K.VERB_2OBJ]],
    neg=True,
)

ALL_CELLS: tuple[str, ...] = (
    ONE_OBJECT_CELLS + TWO_OBJECT_CELLS + MULTIPLES_CELLS + NEGATION_CELLS
)

assert len(ALL_CELLS) == len(set(ALL_CELLS)) == 36


def is_mult_cell(type_key: str) -> bool:
    return "_mult:" in type_key


def is_neg_cell(type_key: str) -> bool:
    return "_neg:" in type_key


def parse_type_key(type_key: str) -> tuple[int, list[AttributeKind], bool, bool]:
    """Split a cell key into (n_objects, kinds, mult, neg)."""
    head, _, attrs = type_key.partition(":")
    mult = head.endswith("_mult")
    neg = head.endswith("_neg")
    n = int(head[0])
    kinds = [] if attrs == "none" else [AttributeKind(v) for v in attrs.split("+")]
    return n, kinds, mult, neg


def cell_capacity(type_key: str, vocab: Vocabulary) -> int:
    """Number of distinct prompts a vocabulary can realize for one cell.

    Counts bound specifications; the realizer maps distinct specs of one
    cell to distinct surface strings.
    """
    n_obj, kinds, mult, _ = parse_type_key(type_key)
    n = len(vocab.nouns)
    a = len(vocab.adjectives)
    vi = len(vocab.intransitive_verbs)
    vt = len(vocab.transitive_verbs)
    s1 = len(vocab.spatial_intransitive)
    s2 = len(vocab.spatial_transitive)
    t = len(vocab.temporal)
    m = len(vocab.numerals)

    total = n if n_obj == 1 else n * (n - 1)
    if mult:
        total *= m if n_obj == 1 else m * (m - 1)

    placements = 2 if n_obj == 2 else 1  # free per-object attributes bind either slot
    per_kind = {
        _K.ADJECTIVE: a * placements,
        _K.SPATIAL_1OBJ: s1 * placements,
        _K.SPATIAL_2OBJ: s2,
        _K.VERB_1OBJ: vi * placements,
        _K.VERB_2OBJ: vt,
        _K.TEMPORAL_VERB_1OBJ: t * vi * placements,
        _K.TEMPORAL_VERB_2OBJ: t * vt,
    }
    sizes = {_K.ADJECTIVE: a, _K.SPATIAL_1OBJ: s1, _K.VERB_1OBJ: vi}

    if len(kinds) == 2 and kinds[0] == kinds[1]:
        # Two same-kind attributes: ordered distinct word pair, one per slot
        # (two-object) or both on the single object in surface order.
        k = sizes[kinds[0]]
        total *= k * (k - 1)
    else:
        for kind in kinds:
            total *= per_kind[kind]
    return total
