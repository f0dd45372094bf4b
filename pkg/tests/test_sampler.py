import io
from collections import Counter

import pytest

from upvkit.augment import AugmentConfig, SynonymLexicon
from upvkit.corpus import Corpus, Sample
from upvkit.sampler import (
    RatioConfig,
    RelationTier,
    dump_instances,
    expand_real_simulation,
    generate_training_instances,
    make_test_set_instances,
    multi_gold_tier,
)
from upvkit.synth import synth_corpus
from upvkit.taxonomy import relation


def empty_lexicon():
    return SynonymLexicon({})


def aug():
    return AugmentConfig(strength=0.2, stopwords=frozenset())


def single_label_corpus(tax, n):
    c = synth_corpus(tax, seed=3, samples_per_label=-(-n // len(tax)), multi_label_fraction=0.0)
    return Corpus(samples=c.samples[:n], taxonomy=tax)


class TestGenerate:
    def test_default_ratio_counts(self, full_tax):
        corpus = single_label_corpus(full_tax, 100)
        instances, report = generate_training_instances(
            corpus, full_tax, RatioConfig(5, 11, 24), aug(), empty_lexicon(), seed=1
        )
        by_tier = Counter(i.tier for i in instances)
        assert by_tier[RelationTier.POSITIVE] == 100
        assert by_tier[RelationTier.MILDLY_NEGATIVE] == 500 - report.substitutions.get(
            "mildly_negative->negative", 0
        ) - report.substitutions.get("mildly_negative->strictly_negative", 0)
        total_negatives = sum(v for k, v in by_tier.items() if k is not RelationTier.POSITIVE)
        assert total_negatives == 4000
        assert len(instances) == 4100

    def test_zero_ratios_positives_only(self, full_tax):
        corpus = single_label_corpus(full_tax, 20)
        instances, _ = generate_training_instances(
            corpus, full_tax, RatioConfig(0, 0, 0), aug(), empty_lexicon(), seed=1
        )
        assert all(i.tier is RelationTier.POSITIVE for i in instances)
        assert len(instances) == 20

    def test_no_gold_collisions(self, tiny_tax):
        sample = Sample(
            id="s1",
            text="the cow pays school fees",
            tokens=("the", "cow", "pays", "school", "fees"),
            labels=frozenset({"aspiration", "reputation"}),
        )
        corpus = Corpus(samples=(sample,) * 1, taxonomy=tiny_tax)
        instances, _ = generate_training_instances(
            corpus, tiny_tax, RatioConfig(2, 2, 2), aug(), empty_lexicon(), seed=5
        )
        for inst in instances:
            if inst.tier is not RelationTier.POSITIVE:
                assert inst.label not in {"aspiration", "reputation"}

    def test_tier_recomputes_from_taxonomy(self, full_tax):
        corpus = single_label_corpus(full_tax, 30)
        instances, _ = generate_training_instances(
            corpus, full_tax, RatioConfig(3, 3, 3), aug(), empty_lexicon(), seed=2
        )
        by_origin_gold = {}
        for inst in instances:
            if inst.tier is RelationTier.POSITIVE:
                by_origin_gold.setdefault(inst.origin_id, []).append(inst.label)
        for inst in instances:
            if inst.tier is RelationTier.POSITIVE:
                continue
            anchors = by_origin_gold[inst.origin_id]
            assert any(relation(a, inst.label, full_tax) is inst.tier for a in anchors)

    def test_targets_and_weights_canonical(self, full_tax):
        corpus = single_label_corpus(full_tax, 10)
        instances, _ = generate_training_instances(
            corpus, full_tax, RatioConfig(2, 2, 2), aug(), empty_lexicon(), seed=2
        )
        mapping = {
            RelationTier.POSITIVE: ((1, 1, 1), 1.0),
            RelationTier.MILDLY_NEGATIVE: ((0, 1, 1), 0.5),
            RelationTier.NEGATIVE: ((0, 0, 1), 1.0),
            RelationTier.STRICTLY_NEGATIVE: ((0, 0, 0), 1.0),
        }
        for inst in instances:
            targets, weight = mapping[inst.tier]
            assert inst.targets == targets
            assert inst.weight == weight

    def test_positive_tokens_unmodified(self, full_tax):
        corpus = single_label_corpus(full_tax, 15)
        instances, _ = generate_training_instances(
            corpus, full_tax, RatioConfig(1, 1, 1), aug(), empty_lexicon(), seed=9
        )
        originals = {s.id: s.tokens for s in corpus}
        for inst in instances:
            if inst.tier is RelationTier.POSITIVE:
                assert inst.tokens == originals[inst.origin_id]

    def test_deterministic_under_seed(self, full_tax):
        corpus = single_label_corpus(full_tax, 12)
        a, _ = generate_training_instances(
            corpus, full_tax, RatioConfig(2, 3, 4), aug(), empty_lexicon(), seed=7
        )
        b, _ = generate_training_instances(
            corpus, full_tax, RatioConfig(2, 3, 4), aug(), empty_lexicon(), seed=7
        )
        assert a == b

    def test_exhausted_tier_falls_back(self, full_tax):
        # faith is the only leaf under its T2 group, so its mildly-negative
        # pool is empty and the quota must come from the negative tier
        sample = Sample(id="f1", text="we pray in church", tokens=("we", "pray", "in", "church"), labels=frozenset({"faith"}))
        corpus = Corpus(samples=(sample,), taxonomy=full_tax)
        instances, report = generate_training_instances(
            corpus, full_tax, RatioConfig(2, 0, 0), aug(), empty_lexicon(), seed=1,
            trained=list(full_tax.t3_ids),
        )
        negatives = [i for i in instances if i.tier is not RelationTier.POSITIVE]
        assert len(negatives) == 2
        assert all(i.tier is RelationTier.NEGATIVE for i in negatives)
        assert report.substitutions == {"mildly_negative->negative": 2}

    def test_small_pool_draws_with_replacement(self, tiny_tax):
        # aspiration's mildly-negative pool is {reputation, modernisation}
        sample = Sample(id="a1", text="i want to be king", tokens=("i", "want", "to", "be", "king"), labels=frozenset({"aspiration"}))
        corpus = Corpus(samples=(sample,), taxonomy=tiny_tax)
        instances, report = generate_training_instances(
            corpus, tiny_tax, RatioConfig(5, 0, 0), aug(), empty_lexicon(), seed=1,
            trained=list(tiny_tax.t3_ids),
        )
        mild = [i for i in instances if i.tier is RelationTier.MILDLY_NEGATIVE]
        assert len(mild) == 5
        assert {i.label for i in mild} == {"reputation", "modernisation"}
        assert report.substitutions == {}


class TestTestSetInstances:
    def test_arithmetic(self, full_tax):
        corpus = single_label_corpus(full_tax, 10)
        instances, _ = make_test_set_instances(corpus, full_tax, RatioConfig(5, 11, 24), seed=3)
        assert len(instances) == 410

    def test_text_never_deformed(self, full_tax):
        corpus = single_label_corpus(full_tax, 10)
        instances, _ = make_test_set_instances(corpus, full_tax, RatioConfig(5, 11, 24), seed=3)
        originals = {s.id: s.tokens for s in corpus}
        assert all(inst.tokens == originals[inst.origin_id] for inst in instances)

    def test_tier_composition(self, full_tax):
        corpus = single_label_corpus(full_tax, 10)
        instances, report = make_test_set_instances(corpus, full_tax, RatioConfig(5, 11, 24), seed=3)
        by_tier = Counter(i.tier for i in instances)
        assert by_tier[RelationTier.POSITIVE] == 10
        assert sum(v for t, v in by_tier.items() if t is not RelationTier.POSITIVE) == 400
        if not report.substitutions:
            assert by_tier[RelationTier.MILDLY_NEGATIVE] == 50
            assert by_tier[RelationTier.NEGATIVE] == 110
            assert by_tier[RelationTier.STRICTLY_NEGATIVE] == 240

    def test_determinism(self, full_tax):
        corpus = single_label_corpus(full_tax, 6)
        a, _ = make_test_set_instances(corpus, full_tax, RatioConfig(1, 2, 3), seed=11)
        b, _ = make_test_set_instances(corpus, full_tax, RatioConfig(1, 2, 3), seed=11)
        assert a == b


class TestRealSimulation:
    def test_counts(self, full_tax):
        corpus = single_label_corpus(full_tax, 4)
        trained = list(full_tax.t3_ids)[:50]
        instances = expand_real_simulation(corpus, full_tax, trained)
        assert len(instances) == 4 * 50

    def test_two_gold_of_fifty(self, full_tax):
        sample = Sample(
            id="x",
            text="one two three",
            tokens=("one", "two", "three"),
            labels=frozenset({"faith", "aspiration"}),
        )
        corpus = Corpus(samples=(sample,), taxonomy=full_tax)
        trained = [t for t in full_tax.t3_ids if t != "harmony"][:50]
        assert {"faith", "aspiration"} <= set(trained)
        instances = expand_real_simulation(corpus, full_tax, trained)
        assert len(instances) == 50
        positives = [i for i in instances if i.tier is RelationTier.POSITIVE]
        assert {i.label for i in positives} == {"faith", "aspiration"}

    def test_filtered_gold_label_gives_all_negative(self, full_tax):
        sample = Sample(id="x", text="one two three", tokens=("one", "two", "three"), labels=frozenset({"faith"}))
        corpus = Corpus(samples=(sample,), taxonomy=full_tax)
        trained = [t for t in full_tax.t3_ids if t != "faith"][:20]
        instances = expand_real_simulation(corpus, full_tax, trained)
        assert all(i.targets[0] == 0 for i in instances)

    def test_multi_gold_targets_reflect_ancestors(self, full_tax):
        # gold {aspiration}: reputation shares its T2, dignity only its T1
        gold = frozenset({"aspiration"})
        assert multi_gold_tier("reputation", gold, full_tax) is RelationTier.MILDLY_NEGATIVE
        assert multi_gold_tier("dignity", gold, full_tax) is RelationTier.NEGATIVE
        assert multi_gold_tier("faith", gold, full_tax) is RelationTier.STRICTLY_NEGATIVE
        gold2 = frozenset({"aspiration", "faith"})
        assert multi_gold_tier("faith", gold2, full_tax) is RelationTier.POSITIVE

    def test_large_scale_arithmetic(self, full_tax):
        corpus = single_label_corpus(full_tax, 530)
        trained = list(full_tax.t3_ids)[:46]
        instances = expand_real_simulation(corpus, full_tax, trained)
        assert len(instances) == 530 * 46 == 24380


def test_dump_instances_round_shape(full_tax):
    corpus = single_label_corpus(full_tax, 3)
    instances, _ = make_test_set_instances(corpus, full_tax, RatioConfig(1, 1, 1), seed=0)
    buf = io.StringIO()
    n = dump_instances(instances, buf)
    assert n == len(instances)
    import json

    lines = [json.loads(l) for l in buf.getvalue().splitlines()]
    assert all(set(l) == {"origin_id", "label", "tier", "weight", "targets", "tokens"} for l in lines)
