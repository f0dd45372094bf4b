import io
import os

# single-core numerics: runtime bounds below are per-core promises, and a
# fixed thread count keeps reductions bit-reproducible
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from upvkit.augment import AugmentConfig, SynonymLexicon
from upvkit.embeddings import EmbeddingTable
from upvkit.taxonomy import default_taxonomy, parse_taxonomy

# Two pillars, four groups, seven leaves: big enough to populate every
# relation tier, small enough to enumerate by hand in assertions.
TINY_TAXONOMY = """\
Social Significance | Status | Aspiration | wanting to become better
Social Significance | Status | Reputation | opinion held about character
Social Significance | Status | Modernisation | moving to a modern society
Social Significance | Identity | Dignity | being worthy of respect
Emotional | Contentment | Aesthetics | pleasing appearance of an item
Emotional | Contentment | Comfort | state of positive feeling
Emotional | Human Welfare | Safety | protected from accidents
"""


@pytest.fixture
def tiny_tax():
    return parse_taxonomy(io.StringIO(TINY_TAXONOMY))


@pytest.fixture(scope="session")
def full_tax():
    return default_taxonomy()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_lexicon():
    return SynonymLexicon(
        {
            "important": ("vital", "essential"),
            "cow": ("cattle",),
            "school": ("classes",),
            "big": ("large", "huge"),
        }
    )


@pytest.fixture
def aug_cfg():
    return AugmentConfig(strength=0.1, stopwords=frozenset({"the", "a", "is"}))


@pytest.fixture
def random_table():
    return EmbeddingTable.empty(dim=16, oov_policy="random_fixed")
