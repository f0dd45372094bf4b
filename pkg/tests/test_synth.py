import io

import pytest

from upvkit.corpus import dump_corpus
from upvkit.synth import KeywordTable, default_keyword_table, synth_corpus


def test_counting_bounds(full_tax):
    table = default_keyword_table(full_tax)
    # 40-label slice of the taxonomy
    from upvkit.taxonomy import _build

    sub = _build(full_tax.nodes[:40])
    c = synth_corpus(sub, seed=1, samples_per_label=10, table=table)
    assert 200 <= len(c) <= 400
    support = c.label_support()
    assert all(support[t] >= 10 for t in sub.t3_ids)


def test_byte_identical_under_seed(full_tax):
    a, b = (synth_corpus(full_tax, seed=7, samples_per_label=3) for _ in range(2))
    bufs = []
    for c in (a, b):
        buf = io.StringIO()
        dump_corpus(c, buf)
        bufs.append(buf.getvalue())
    assert bufs[0] == bufs[1]


def test_different_seeds_differ(full_tax):
    a = synth_corpus(full_tax, seed=1, samples_per_label=2)
    b = synth_corpus(full_tax, seed=2, samples_per_label=2)
    assert [s.text for s in a.samples] != [s.text for s in b.samples]


def test_missing_label_rejected(full_tax):
    table = default_keyword_table(full_tax)
    broken = KeywordTable(
        signatures={k: v for k, v in table.signatures.items() if k != "faith"},
        distractors=table.distractors,
    )
    with pytest.raises(ValueError, match="missing labels"):
        synth_corpus(full_tax, seed=0, samples_per_label=1, table=broken)


def test_signature_floor_enforced():
    with pytest.raises(ValueError, match=">= 3 signature"):
        KeywordTable(signatures={"x": ("one", "two")}, distractors=("a",))


def test_distractor_collision_rejected():
    with pytest.raises(ValueError, match="collide"):
        KeywordTable(signatures={"x": ("one", "two", "three")}, distractors=("one",))


def test_every_sample_carries_its_signatures(full_tax):
    table = default_keyword_table(full_tax)
    c = synth_corpus(full_tax, seed=3, samples_per_label=2)
    for s in c.samples:
        for lab in s.labels:
            assert set(s.tokens) & set(table.signatures[lab])
