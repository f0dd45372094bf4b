"""Precision/recall/F1 at all label granularities, ROC/AUC, both protocols.

``test_set`` scores the tier-ratio instance expansion as plain binary
decisions at threshold 0.5, per level.  ``real_simulation`` pairs every
sample with every trained label, applies per-label tuned thresholds, and
scores the resulting predicted label sets, which is what deployment on a
fresh interview looks like.  Coarser levels under real simulation come from
mapping predicted and gold leaf sets upward through the taxonomy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Corpus
from .model import Model
from .sampler import (
    RatioConfig,
    expand_real_simulation,
    generate_training_instances,
    make_test_set_instances,
)
from .taxonomy import Taxonomy

_LEVEL_INDEX = {"t3": 0, "t2": 1, "t1": 2}


@dataclass
class LabelMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    tp: int
    fp: int
    fn: int
    auc: float | None = None
    threshold: float | None = None


@dataclass
class LevelReport:
    per_label: dict[str, LabelMetrics]
    micro: tuple[float, float, float]
    macro: tuple[float, float, float]


@dataclass
class MetricsReport:
    protocol: str
    levels: dict[str, LevelReport]
    notices: list[str] = field(default_factory=list)


def _prf_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def _level_report(counts: dict[str, tuple[int, int, int, int]]) -> LevelReport:
    per_label: dict[str, LabelMetrics] = {}
    sum_tp = sum_fp = sum_fn = 0
    macro_rows = []
    for label, (tp, fp, fn, support) in counts.items():
        p, r, f1 = _prf_from_counts(tp, fp, fn)
        per_label[label] = LabelMetrics(p, r, f1, support, tp, fp, fn)
        sum_tp += tp
        sum_fp += fp
        sum_fn += fn
        if support > 0:
            macro_rows.append((p, r, f1))
    micro = _prf_from_counts(sum_tp, sum_fp, sum_fn)
    if macro_rows:
        macro = tuple(float(np.mean([row[i] for row in macro_rows])) for i in range(3))
    else:
        macro = (0.0, 0.0, 0.0)
    return LevelReport(per_label=per_label, micro=micro, macro=macro)


def prf(
    predicted: Sequence[set[str]],
    gold: Sequence[set[str]],
    labels: Sequence[str],
) -> LevelReport:
    """Set-based multi-label metrics over aligned sample lists."""
    if len(predicted) != len(gold):
        raise ValueError("predicted and gold lists differ in length")
    space = set(labels)
    counts = {lab: [0, 0, 0, 0] for lab in labels}
    for pred_set, gold_set in zip(predicted, gold):
        pred_set = pred_set & space
        gold_set = gold_set & space
        for lab in pred_set & gold_set:
            counts[lab][0] += 1
        for lab in pred_set - gold_set:
            counts[lab][1] += 1
        for lab in gold_set - pred_set:
            counts[lab][2] += 1
        for lab in gold_set:
            counts[lab][3] += 1
    return _level_report({k: tuple(v) for k, v in counts.items()})


@dataclass
class RocCurve:
    label: str
    points: list[tuple[float, float]]  # (fpr, tpr), monotone in both axes
    auc: float


def roc(scores: np.ndarray, gold: np.ndarray, label: str = "") -> RocCurve | None:
    """Threshold-sweep ROC with trapezoidal AUC; ties share one sweep point.

    Returns None for a degenerate label whose gold is single-class.
    """
    gold = gold.astype(bool)
    n_pos = int(gold.sum())
    n_neg = int(len(gold) - n_pos)
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_gold = gold[order]
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    n = len(scores)
    while i < n:
        j = i
        while j < n and sorted_scores[j] == sorted_scores[i]:
            j += 1
        tp += int(sorted_gold[i:j].sum())
        fp += (j - i) - int(sorted_gold[i:j].sum())
        points.append((fp / n_neg, tp / n_pos))
        i = j
    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return RocCurve(label=label, points=points, auc=auc)


def _instance_level_counts(
    labels_per_instance: list[str],
    scores: np.ndarray,
    targets: np.ndarray,
    group_of: dict[str, str],
) -> dict[str, tuple[int, int, int, int]]:
    counts: dict[str, list[int]] = {}
    preds = scores >= 0.5
    gold = targets >= 0.5
    for lab, pred, is_gold in zip(labels_per_instance, preds, gold):
        group = group_of[lab]
        row = counts.setdefault(group, [0, 0, 0, 0])
        if pred and is_gold:
            row[0] += 1
        elif pred:
            row[1] += 1
        elif is_gold:
            row[2] += 1
        if is_gold:
            row[3] += 1
    return {k: tuple(v) for k, v in counts.items()}


def evaluate(
    model: Model,
    eval_corpus: Corpus,
    protocol: str,
    tax: Taxonomy,
    thresholds: dict[str, float] | None = None,
    ratios: RatioConfig | None = None,
    seed: int = 0,
) -> MetricsReport:
    """Score ``eval_corpus`` under one protocol; see the module docstring."""
    if protocol == "test_set":
        return _evaluate_test_set(model, eval_corpus, tax, ratios or RatioConfig(), seed)
    if protocol == "real_simulation":
        return _evaluate_real_simulation(model, eval_corpus, tax, thresholds)
    raise ValueError(f"unknown protocol {protocol!r}")


def _evaluate_test_set(
    model: Model, eval_corpus: Corpus, tax: Taxonomy, ratios: RatioConfig, seed: int
) -> MetricsReport:
    instances, _ = make_test_set_instances(
        eval_corpus, tax, ratios, seed, trained=model.trained_labels
    )
    scores = model.score_pairs([(list(i.tokens), i.label) for i in instances])
    labels_per_instance = [i.label for i in instances]
    report = MetricsReport(protocol="test_set", levels={})
    for level in model.config.levels:
        if level == "t3":
            group_of = {t: t for t in model.trained_labels}
        elif level == "t2":
            group_of = {t: tax.node(t).t2 for t in model.trained_labels}
        else:
            group_of = {t: tax.node(t).t1 for t in model.trained_labels}
        targets = np.array([i.targets[_LEVEL_INDEX[level]] for i in instances], dtype=float)
        counts = _instance_level_counts(labels_per_instance, scores[level], targets, group_of)
        report.levels[level] = _level_report(counts)
    return report


def _evaluate_real_simulation(
    model: Model,
    eval_corpus: Corpus,
    tax: Taxonomy,
    thresholds: dict[str, float] | None,
) -> MetricsReport:
    trained = model.trained_labels
    if thresholds is None:
        thresholds = {t: 0.5 for t in trained}
    missing = [t for t in trained if t not in thresholds]
    if missing:
        raise ValueError(f"thresholds missing for labels: {missing[:5]}")
    instances = expand_real_simulation(eval_corpus, tax, trained)
    scores = model.score_pairs([(list(i.tokens), i.label) for i in instances])["t3"]

    n_labels = len(trained)
    predicted_sets: list[set[str]] = []
    gold_sets = [set(s.labels) for s in eval_corpus]
    for row, sample in enumerate(eval_corpus):
        base = row * n_labels
        pred = {
            trained[k]
            for k in range(n_labels)
            if scores[base + k] >= thresholds[trained[k]]
        }
        predicted_sets.append(pred)

    report = MetricsReport(protocol="real_simulation", levels={})
    t3_report = prf(predicted_sets, gold_sets, trained)
    gold_flat = np.array([i.targets[0] for i in instances], dtype=float)
    for k, label in enumerate(trained):
        sel = np.arange(len(eval_corpus)) * n_labels + k
        curve = roc(scores[sel], gold_flat[sel], label=label)
        t3_report.per_label[label].auc = curve.auc if curve else None
        t3_report.per_label[label].threshold = thresholds[label]
        if curve is None:
            report.notices.append(f"label {label}: single-class gold, ROC omitted")
    report.levels["t3"] = t3_report

    if "t2" in model.config.levels:
        t2_pred = [{tax.node(l).t2 for l in p} for p in predicted_sets]
        t2_gold = [{tax.node(l).t2 for l in g} for g in gold_sets]
        t2_space = sorted({tax.node(t).t2 for t in trained})
        report.levels["t2"] = prf(t2_pred, t2_gold, t2_space)
    if "t1" in model.config.levels:
        t1_pred = [{tax.node(l).t1 for l in p} for p in predicted_sets]
        t1_gold = [{tax.node(l).t1 for l in g} for g in gold_sets]
        t1_space = sorted({tax.node(t).t1 for t in trained})
        report.levels["t1"] = prf(t1_pred, t1_gold, t1_space)
    return report


def roc_curves(model: Model, eval_corpus: Corpus, tax: Taxonomy) -> dict[str, RocCurve]:
    """Per-label ROC under the full expansion; degenerate labels are skipped."""
    trained = model.trained_labels
    instances = expand_real_simulation(eval_corpus, tax, trained)
    scores = model.score_pairs([(list(i.tokens), i.label) for i in instances])["t3"]
    gold = np.array([i.targets[0] for i in instances], dtype=float)
    n_labels = len(trained)
    curves = {}
    for k, label in enumerate(trained):
        sel = np.arange(len(eval_corpus)) * n_labels + k
        curve = roc(scores[sel], gold[sel], label=label)
        if curve is not None:
            curves[label] = curve
    return curves


# Ratio-sweep mapping: negatives per positive for each sweep total.
RATIO_TABLE: dict[int, tuple[int, int, int]] = {
    0: (0, 0, 0),
    5: (1, 2, 2),
    10: (2, 2, 6),
    15: (3, 4, 8),
    20: (4, 7, 9),
    25: (5, 8, 12),
    30: (5, 11, 14),
    35: (5, 11, 19),
    40: (5, 11, 24),
    45: (5, 10, 30),
    50: (5, 12, 33),
    55: (5, 13, 37),
    60: (5, 14, 41),
}


@dataclass
class SweepRow:
    total: int
    ratios: RatioConfig
    test_set: MetricsReport
    real_simulation: MetricsReport
    epochs_run: int


def ratio_sweep(
    train_corpus: Corpus,
    dev_corpus: Corpus,
    test_corpus: Corpus,
    tax: Taxonomy,
    totals: Sequence[int],
    model_config,
    table,
    train_config,
    aug_cfg,
    lex,
    seed: int = 0,
    ratio_table: dict[int, tuple[int, int, int]] | None = None,
) -> list[SweepRow]:
    """Train one model per ratio total and evaluate under both protocols."""
    from .model import Model as _Model
    from .train import train, tune_thresholds

    mapping = ratio_table or RATIO_TABLE
    rows: list[SweepRow] = []
    trained = train_corpus.trained_labels()
    for total in totals:
        if total not in mapping:
            raise ValueError(f"no ratio triple configured for total {total}")
        ratios = RatioConfig(*mapping[total])
        model = _Model.build(model_config, tax, table, trained, seed=seed)
        train_instances, _ = generate_training_instances(
            train_corpus, tax, ratios, aug_cfg, lex, seed=seed, trained=trained
        )
        dev_instances, _ = make_test_set_instances(dev_corpus, tax, ratios, seed, trained=trained)
        history = train(model, train_instances, dev_instances, train_config)
        thresholds = tune_thresholds(model, dev_corpus, tax)
        rows.append(
            SweepRow(
                total=total,
                ratios=ratios,
                test_set=evaluate(model, test_corpus, "test_set", tax, ratios=ratios, seed=seed),
                real_simulation=evaluate(
                    model, test_corpus, "real_simulation", tax, thresholds=thresholds
                ),
                epochs_run=history.stopped_epoch,
            )
        )
    return rows
