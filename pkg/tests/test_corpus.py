import io
import json
import re

import numpy as np
import pytest

from upvkit.corpus import (
    Corpus,
    CorpusError,
    SplitSpec,
    dump_corpus,
    filter_by_support,
    load_corpus,
    split,
    stats,
    tokenize,
)
from upvkit.synth import default_keyword_table, synth_corpus


def reference_tokenize(text):
    """Independent regex formulation of the documented tokenizer rules."""
    out = []
    for chunk in text.lower().split():
        m = re.match(r"^(\W*?)(\w.*?\w|\w)?(\W*)$", chunk, flags=re.UNICODE)
        lead, core, trail = m.group(1), m.group(2), m.group(3)
        out.extend(lead)
        if core:
            out.append(core)
        out.extend(trail)
    return out


def jsonl(*objs):
    return io.StringIO("\n".join(json.dumps(o) for o in objs))


class TestTokenize:
    def test_basic(self):
        assert tokenize("I can be a king!") == ["i", "can", "be", "a", "king", "!"]

    def test_empty(self):
        assert tokenize("") == []

    def test_punct_detached(self):
        assert tokenize("school fees, fees.") == ["school", "fees", ",", "fees", "."]

    def test_interior_punct_kept(self):
        assert tokenize("don't stop mother-in-law") == ["don't", "stop", "mother-in-law"]

    def test_matches_reference_on_random_text(self):
        rng = np.random.default_rng(3)
        words = ["cow", "Fees!", "don't", "...", "a,b", "(school)", "it's.", "x", "!?ok"]
        for _ in range(300):
            n = int(rng.integers(1, 8))
            text = " ".join(words[int(i)] for i in rng.integers(0, len(words), n))
            assert tokenize(text) == reference_tokenize(text)


class TestLoadCorpus:
    def test_direct_parse(self, tiny_tax):
        c = load_corpus(
            jsonl({"id": "a1", "text": "school fees are paid with the cow", "t3_labels": ["aspiration"]}),
            tiny_tax,
        )
        assert len(c) == 1
        assert len(c.samples[0].tokens) == 7

    def test_short_sentence_dropped(self, tiny_tax):
        c = load_corpus(jsonl({"id": "a2", "text": "no", "t3_labels": ["safety"]}), tiny_tax)
        assert len(c) == 0
        assert c.dropped_short == 1

    def test_unlabeled_dropped_and_counted(self, tiny_tax):
        c = load_corpus(jsonl({"id": "a3", "text": "one two three", "t3_labels": []}), tiny_tax)
        assert len(c) == 0
        assert c.dropped_unlabeled == 1

    def test_unknown_label_strict_vs_lenient(self, tiny_tax):
        stream = lambda: jsonl({"id": "a", "text": "one two three", "t3_labels": ["bogus"]})
        with pytest.raises(CorpusError, match="unknown label"):
            load_corpus(stream(), tiny_tax)
        with pytest.warns(UserWarning):
            c = load_corpus(stream(), tiny_tax, lenient=True)
        assert c.skipped_unknown_labels == 1

    def test_malformed_line_number(self, tiny_tax):
        bad = io.StringIO('{"id": "a", "text": "one two three", "t3_labels": ["safety"]}\n{oops\n')
        with pytest.raises(ValueError, match="line 2"):
            load_corpus(bad, tiny_tax)

    def test_duplicate_id(self, tiny_tax):
        with pytest.raises(CorpusError, match="duplicate id"):
            load_corpus(
                jsonl(
                    {"id": "a", "text": "one two three", "t3_labels": ["safety"]},
                    {"id": "a", "text": "four five six", "t3_labels": ["safety"]},
                ),
                tiny_tax,
            )

    def test_display_names_normalized(self, tiny_tax):
        c = load_corpus(
            jsonl({"id": "a", "text": "one two three", "t3_labels": ["Aspiration"]}), tiny_tax
        )
        assert c.samples[0].labels == {"aspiration"}

    def test_round_trip(self, tiny_tax):
        c = load_corpus(
            jsonl(
                {"id": "a", "text": "one two three", "t3_labels": ["safety", "comfort"]},
                {"id": "b", "text": "the cow gives milk", "t3_labels": ["aspiration"]},
            ),
            tiny_tax,
        )
        buf = io.StringIO()
        dump_corpus(c, buf)
        buf.seek(0)
        again = load_corpus(buf, tiny_tax)
        assert again.samples == c.samples

    def test_extra_fields_ignored(self, tiny_tax):
        c = load_corpus(
            jsonl({"id": "a", "text": "one two three", "t3_labels": ["safety"], "empty_labels": False}),
            tiny_tax,
        )
        assert len(c) == 1


def make_corpus(tax, n, seed=0):
    table = default_keyword_table(tax)
    per_label = -(-n // len(tax))  # ceil so the slice below always has n samples
    c = synth_corpus(tax, seed=seed, samples_per_label=per_label, table=table)
    return Corpus(samples=c.samples[:n], taxonomy=tax)


class TestSplit:
    def test_explicit_test_count_split(self, full_tax):
        big = make_corpus(full_tax, 5102)
        assert len(big) == 5102
        tr, dev, te = split(big, SplitSpec(train_fraction=0.8, dev_count=450, seed=1, test_count=530))
        assert (len(tr), len(dev), len(te)) == (4122, 450, 530)

    def test_small_case(self, full_tax):
        c = make_corpus(full_tax, 10)
        tr, dev, te = split(c, SplitSpec(train_fraction=0.8, dev_count=1, seed=0))
        assert (len(tr), len(dev), len(te)) == (8, 1, 1)

    def test_partition(self, full_tax):
        c = make_corpus(full_tax, 57)
        tr, dev, te = split(c, SplitSpec(train_fraction=0.8, dev_count=5, seed=3))
        ids = [s.id for part in (tr, dev, te) for s in part]
        assert len(ids) == len(set(ids)) == len(c)

    def test_deterministic(self, full_tax):
        c = make_corpus(full_tax, 57)
        spec = SplitSpec(train_fraction=0.8, dev_count=5, seed=9)
        a = split(c, spec)
        b = split(c, spec)
        for pa, pb in zip(a, b):
            assert [s.id for s in pa] == [s.id for s in pb]

    def test_dev_count_too_large(self, full_tax):
        c = make_corpus(full_tax, 10)
        with pytest.raises(ValueError):
            split(c, SplitSpec(train_fraction=0.8, dev_count=5, seed=0))


class TestFilterBySupport:
    def test_threshold_is_strict(self, tiny_tax):
        samples = []
        for i in range(30):
            samples.append({"id": f"s{i}", "text": "one two three", "t3_labels": ["safety", "comfort"]})
        c = load_corpus(jsonl(*samples), tiny_tax)
        kept, rejected = filter_by_support(c, 30)
        assert rejected == ["comfort", "safety"]
        assert len(kept) == 0

    def test_zero_threshold_keeps_all(self, tiny_tax):
        c = load_corpus(jsonl({"id": "a", "text": "one two three", "t3_labels": ["safety"]}), tiny_tax)
        kept, rejected = filter_by_support(c, 0)
        assert rejected == []
        assert kept.samples == c.samples

    def test_low_support_label_removed(self, tiny_tax):
        objs = [{"id": f"s{i}", "text": "one two three", "t3_labels": ["safety"]} for i in range(11)]
        objs += [{"id": f"c{i}", "text": "one two three", "t3_labels": ["comfort", "safety"]} for i in range(5)]
        c = load_corpus(jsonl(*objs), tiny_tax)
        kept, rejected = filter_by_support(c, 10)
        assert rejected == ["comfort"]
        assert all("comfort" not in s.labels for s in kept)
        assert len(kept) == 16


class TestStats:
    def test_hand_counts(self, tiny_tax):
        c = load_corpus(
            jsonl(
                {"id": "a", "text": "one two three", "t3_labels": ["safety", "comfort"]},
                {"id": "b", "text": "one two three four", "t3_labels": ["safety"]},
            ),
            tiny_tax,
        )
        st = stats(c)
        assert st.support == {"comfort": 1, "safety": 2}
        assert st.multi_label_fraction == 0.5
        assert st.over_two_label_fraction == 0.0
        assert st.avg_tokens == 3.5
        i, j = st.labels.index("comfort"), st.labels.index("safety")
        assert st.cooccurrence[i, j] == st.cooccurrence[j, i] == 1
        assert st.cooccurrence[j, j] == 2  # diagonal keeps own support

    def test_three_label_sample(self, tiny_tax):
        c = load_corpus(
            jsonl({"id": "a", "text": "one two three", "t3_labels": ["safety", "comfort", "dignity"]}),
            tiny_tax,
        )
        st = stats(c)
        m = st.cooccurrence
        off_diagonal = m[~np.eye(len(st.labels), dtype=bool)]
        assert off_diagonal.sum() == 6  # three symmetric pairs

    def test_supports_match_bruteforce(self, full_tax):
        c = make_corpus(full_tax, 300, seed=5)
        st = stats(c)
        brute = {}
        for s in c.samples:
            for lab in s.labels:
                brute[lab] = brute.get(lab, 0) + 1
        assert st.support == brute

    def test_empty_corpus_rejected(self, tiny_tax):
        with pytest.raises(CorpusError):
            stats(Corpus(samples=(), taxonomy=tiny_tax))
