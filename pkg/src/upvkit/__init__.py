"""upvkit: user-perceived-value classification toolkit."""

__version__ = "0.1.0"

from .taxonomy import (  # noqa: F401
    RelationTier,
    Taxonomy,
    default_taxonomy,
    load_taxonomy,
    relation,
    sample_label,
)
from .corpus import Corpus, Sample, SplitSpec, load_corpus, split, tokenize  # noqa: F401
