"""Typed compositional caption grammar: generation and round-trip parsing."""

from .cells import (
    ALL_CELLS,
    MULTIPLES_CELLS,
    NEGATION_CELLS,
    ONE_OBJECT_CELLS,
    TWO_OBJECT_CELLS,
    AttributeKind,
    BoundAttribute,
    PromptSpec,
    SpecError,
    cell_capacity,
    is_mult_cell,
    is_neg_cell,
    type_key_of,
)
from .generate import (
    CapacityError,
    Prompt,
    generate_corpus,
    read_corpus,
    swap_variant,
    write_corpus,
)
from .parse import AmbiguityError, ParseError, parse
from .realize import realize
from .vocab import (
    Vocabulary,
    VocabSchemaError,
    VocabValidationError,
    article_for,
    bundled_vocabulary_path,
    load_vocabulary,
    make_vocabulary,
    pluralize,
)

__all__ = [
    "ALL_CELLS",
    "ONE_OBJECT_CELLS",
    "TWO_OBJECT_CELLS",
    "MULTIPLES_CELLS",
    "NEGATION_CELLS",
    "AttributeKind",
    "BoundAttribute",
    "PromptSpec",
    "SpecError",
    "Prompt",
    "CapacityError",
    "AmbiguityError",
    "ParseError",
    "Vocabulary",
    "VocabSchemaError",
    "VocabValidationError",
    "article_for",
    "bundled_vocabulary_path",
    "cell_capacity",
    "generate_corpus",
    "is_mult_cell",
    "is_neg_cell",
    "load_vocabulary",
    "make_vocabulary",
    "parse",
    "pluralize",
    "read_corpus",
    "realize",
    "swap_variant",
    "type_key_of",
    "write_corpus",
]
