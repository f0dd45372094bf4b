from fractions import Fraction

import numpy as np
import pytest

from upvkit.corpus import Corpus, Sample
from upvkit.evaluate import (
    LevelReport,
    MetricsReport,
    RATIO_TABLE,
    evaluate,
    prf,
    roc,
)
from upvkit.model import ModelConfig
from upvkit.sampler import RatioConfig


def pairwise_auc_oracle(scores, gold):
    """P(score_pos > score_neg) with half credit for ties, by enumeration."""
    pos = [s for s, g in zip(scores, gold) if g]
    neg = [s for s, g in zip(scores, gold) if not g]
    if not pos or not neg:
        return None
    total = Fraction(0)
    for p in pos:
        for n in neg:
            if p > n:
                total += 1
            elif p == n:
                total += Fraction(1, 2)
    return total / (len(pos) * len(neg))


def counting_prf_oracle(predicted, gold, labels):
    """Independent reimplementation of per-label and aggregate P/R/F1."""
    per_label = {}
    for lab in labels:
        tp = sum(1 for p, g in zip(predicted, gold) if lab in p and lab in g)
        fp = sum(1 for p, g in zip(predicted, gold) if lab in p and lab not in g)
        fn = sum(1 for p, g in zip(predicted, gold) if lab not in p and lab in g)
        support = sum(1 for g in gold if lab in g)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per_label[lab] = (prec, rec, f1, support, tp, fp, fn)
    stp = sum(v[4] for v in per_label.values())
    sfp = sum(v[5] for v in per_label.values())
    sfn = sum(v[6] for v in per_label.values())
    mp = stp / (stp + sfp) if stp + sfp else 0.0
    mr = stp / (stp + sfn) if stp + sfn else 0.0
    mf = 2 * mp * mr / (mp + mr) if mp + mr else 0.0
    supported = [v for v in per_label.values() if v[3] > 0]
    if supported:
        macro = tuple(sum(v[i] for v in supported) / len(supported) for i in range(3))
    else:
        macro = (0.0, 0.0, 0.0)
    return per_label, (mp, mr, mf), macro


class TestPrf:
    def test_perfect_predictions(self):
        gold = [{"a"}, {"b"}, {"a", "b"}]
        report = prf(gold, gold, ["a", "b"])
        assert report.micro == (1.0, 1.0, 1.0)
        assert report.macro == (1.0, 1.0, 1.0)

    def test_hand_case(self):
        predicted = [{"a"}, {"a"}, set()]
        gold = [{"a"}, set(), {"a"}]
        report = prf(predicted, gold, ["a"])
        m = report.per_label["a"]
        assert (m.precision, m.recall, m.f1) == (0.5, 0.5, 0.5)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            prf([{"a"}], [], ["a"])

    def test_matches_counting_oracle_on_random_cases(self):
        labels = [f"l{i}" for i in range(6)]
        rng = np.random.default_rng(99)
        for case in range(200):
            n = int(rng.integers(1, 15))
            predicted = [
                {lab for lab in labels if rng.random() < 0.3} for _ in range(n)
            ]
            gold = [{lab for lab in labels if rng.random() < 0.3} for _ in range(n)]
            report = prf(predicted, gold, labels)
            oracle_labels, oracle_micro, oracle_macro = counting_prf_oracle(predicted, gold, labels)
            for lab in labels:
                m = report.per_label[lab]
                o = oracle_labels[lab]
                assert abs(m.precision - o[0]) < 1e-12
                assert abs(m.recall - o[1]) < 1e-12
                assert abs(m.f1 - o[2]) < 1e-12
                assert m.support == o[3]
            assert np.allclose(report.micro, oracle_micro, atol=1e-12)
            assert np.allclose(report.macro, oracle_macro, atol=1e-12)


class TestRoc:
    def test_perfect_separation(self):
        curve = roc(np.array([0.9, 0.8, 0.2, 0.1]), np.array([1, 1, 0, 0]))
        assert curve.auc == 1.0

    def test_all_identical_scores(self):
        curve = roc(np.full(10, 0.4), np.array([1, 0] * 5))
        assert curve.auc == pytest.approx(0.5)

    def test_hand_case_matches_pairwise_oracle(self):
        # three positives at .9/.8/.4 against negatives at .7/.3/.1: the
        # only discordant pair is (.4, .7), so the oracle gives 8/9
        scores = np.array([0.9, 0.8, 0.4, 0.7, 0.3, 0.1])
        gold = np.array([1, 1, 1, 0, 0, 0])
        oracle = pairwise_auc_oracle(scores, gold)
        assert oracle == Fraction(8, 9)
        curve = roc(scores, gold)
        assert curve.auc == pytest.approx(float(oracle), abs=1e-12)

    def test_degenerate_returns_none(self):
        assert roc(np.array([0.5, 0.6]), np.array([1, 1])) is None
        assert roc(np.array([0.5, 0.6]), np.array([0, 0])) is None

    def test_points_monotone(self):
        rng = np.random.default_rng(0)
        scores = rng.random(50)
        gold = rng.integers(0, 2, 50)
        curve = roc(scores, gold)
        xs = [p[0] for p in curve.points]
        ys = [p[1] for p in curve.points]
        assert all(a <= b for a, b in zip(xs, xs[1:]))
        assert all(a <= b for a, b in zip(ys, ys[1:]))
        assert curve.points[0] == (0.0, 0.0)
        assert curve.points[-1] == (1.0, 1.0)

    def test_matches_pairwise_oracle_on_random_cases(self):
        rng = np.random.default_rng(7)
        for case in range(200):
            n = int(rng.integers(2, 30))
            # quantized scores force plenty of ties
            scores = np.round(rng.random(n), 1)
            gold = rng.integers(0, 2, n)
            oracle = pairwise_auc_oracle(scores, gold)
            curve = roc(scores, gold)
            if oracle is None:
                assert curve is None
            else:
                assert curve.auc == pytest.approx(float(oracle), abs=1e-12)


def make_eval_corpus(tax):
    rows = [
        ("alpha beta gamma", {"aspiration"}),
        ("delta epsilon zeta", {"comfort", "safety"}),
        ("eta theta iota", {"dignity"}),
        ("kappa lam mu", {"aesthetics"}),
    ]
    samples = tuple(
        Sample(id=f"e{i}", text=t, tokens=tuple(t.split()), labels=frozenset(g))
        for i, (t, g) in enumerate(rows)
    )
    return Corpus(samples=samples, taxonomy=tax)


class StubModel:
    """Duck-typed stand-in scoring from a fixed (tokens, label) function."""

    def __init__(self, tax, labels, fn, heads="t1t2t3"):
        self.taxonomy = tax
        self.trained_labels = list(labels)
        self.config = ModelConfig(heads=heads, emb_dim=4, hidden=2)
        self.fn = fn

    def score_pairs(self, pairs, batch_size=256):
        t3 = np.array([self.fn(tuple(t), lab) for t, lab in pairs])
        out = {"t3": t3}
        for level in self.config.levels:
            if level == "t3":
                continue
            # coarser heads reuse the leaf score mapped through the hierarchy
            if level == "t2":
                out[level] = np.array(
                    [
                        max(self.fn(tuple(t), s) for s in self.trained_labels
                            if self.taxonomy.node(s).t2 == self.taxonomy.node(lab).t2)
                        for t, lab in pairs
                    ]
                )
            else:
                out[level] = np.array(
                    [
                        max(self.fn(tuple(t), s) for s in self.trained_labels
                            if self.taxonomy.node(s).t1 == self.taxonomy.node(lab).t1)
                        for t, lab in pairs
                    ]
                )
        return out


class TestEvaluateProtocols:
    def perfect_model(self, tax, corpus):
        gold = {s.tokens: s.labels for s in corpus}

        def fn(tokens, label):
            return 0.95 if label in gold[tokens] else 0.05

        return StubModel(tax, list(tax.t3_ids), fn)

    def test_perfect_scorer_both_protocols(self, tiny_tax):
        # single-gold samples: with several gold labels per sample the
        # tier targets are anchor-relative, so even an oracle scorer can
        # disagree with a coarse-level target under the test_set expansion
        rows = [("alpha beta gamma", {"aspiration"}), ("delta epsilon zeta", {"comfort"}),
                ("eta theta iota", {"dignity"}), ("kappa lam mu", {"safety"})]
        samples = tuple(
            Sample(id=f"p{i}", text=t, tokens=tuple(t.split()), labels=frozenset(g))
            for i, (t, g) in enumerate(rows)
        )
        corpus = Corpus(samples=samples, taxonomy=tiny_tax)
        model = self.perfect_model(tiny_tax, corpus)
        ts = evaluate(model, corpus, "test_set", tiny_tax, ratios=RatioConfig(2, 2, 2), seed=0)
        rs = evaluate(model, corpus, "real_simulation", tiny_tax)
        for level in ("t1", "t2", "t3"):
            assert ts.levels[level].micro[2] == 1.0, level
            assert rs.levels[level].micro[2] == 1.0, level

    def test_perfect_scorer_real_simulation_multi_gold(self, tiny_tax):
        corpus = make_eval_corpus(tiny_tax)
        model = self.perfect_model(tiny_tax, corpus)
        rs = evaluate(model, corpus, "real_simulation", tiny_tax)
        for level in ("t1", "t2", "t3"):
            assert rs.levels[level].micro[2] == 1.0, level

    def test_constant_scorer_real_simulation(self, tiny_tax):
        corpus = make_eval_corpus(tiny_tax)
        model = StubModel(tiny_tax, list(tiny_tax.t3_ids), lambda t, l: 1.0, heads="t3")
        rs = evaluate(model, corpus, "real_simulation", tiny_tax)
        micro_p, micro_r, _ = rs.levels["t3"].micro
        assert micro_r == 1.0
        n_gold = sum(len(s.labels) for s in corpus)
        assert micro_p == pytest.approx(n_gold / (len(corpus) * len(tiny_tax.t3_ids)))

    def test_t1_report_of_perfect_t3_predictor_is_perfect(self, tiny_tax):
        corpus = make_eval_corpus(tiny_tax)
        model = self.perfect_model(tiny_tax, corpus)
        rs = evaluate(model, corpus, "real_simulation", tiny_tax)
        assert rs.levels["t1"].micro == (1.0, 1.0, 1.0)
        assert rs.levels["t1"].macro == (1.0, 1.0, 1.0)

    def test_unknown_protocol(self, tiny_tax):
        corpus = make_eval_corpus(tiny_tax)
        model = self.perfect_model(tiny_tax, corpus)
        with pytest.raises(ValueError):
            evaluate(model, corpus, "bogus", tiny_tax)

    def test_missing_thresholds_rejected(self, tiny_tax):
        corpus = make_eval_corpus(tiny_tax)
        model = self.perfect_model(tiny_tax, corpus)
        with pytest.raises(ValueError, match="thresholds"):
            evaluate(model, corpus, "real_simulation", tiny_tax, thresholds={"aspiration": 0.5})

    def test_recall_monotone_in_threshold(self, tiny_tax):
        corpus = make_eval_corpus(tiny_tax)
        rng = np.random.default_rng(5)
        table = {}

        def fn(tokens, label):
            key = (tokens, label)
            if key not in table:
                table[key] = float(rng.random())
            return table[key]

        model = StubModel(tiny_tax, list(tiny_tax.t3_ids), fn, heads="t3")
        recalls = []
        for t in (0.1, 0.3, 0.5, 0.7, 0.9):
            thresholds = {lab: t for lab in tiny_tax.t3_ids}
            rs = evaluate(model, corpus, "real_simulation", tiny_tax, thresholds=thresholds)
            recalls.append(rs.levels["t3"].micro[1])
        assert all(a >= b for a, b in zip(recalls, recalls[1:]))

    def test_auc_and_threshold_attached_per_label(self, tiny_tax):
        corpus = make_eval_corpus(tiny_tax)
        model = self.perfect_model(tiny_tax, corpus)
        rs = evaluate(model, corpus, "real_simulation", tiny_tax)
        m = rs.levels["t3"].per_label["aspiration"]
        assert m.auc == 1.0
        assert m.threshold == 0.5


def test_ratio_table_shape():
    assert RATIO_TABLE[40] == (5, 11, 24)
    assert RATIO_TABLE[0] == (0, 0, 0)
    for total, (m, n, s) in RATIO_TABLE.items():
        assert m + n + s == total
