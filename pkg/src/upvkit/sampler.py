"""Binary-relatedness instance generation.

Positives are (sentence, gold label) pairs.  Each positive seeds a quota of
negatives per relation tier, drawn uniformly inside the tier, never colliding
with any of the sentence's gold labels, with deformed text.  Evaluation
expansions reuse the same pairing but never touch the text: the ``test_set``
expansion keeps the training-time tier ratios, while ``real_simulation``
pairs every sample with every trained label, the way a fresh interview would
be annotated.

Per-sample sub-seeds derive from a stable hash of (seed, sample id, gold
label), so generation order, chunking, or parallel scheduling cannot change
the emitted instances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .augment import AugmentConfig, SynonymLexicon, augment
from .corpus import Corpus
from .taxonomy import RelationTier, Taxonomy, eligible_labels, relation
from .util import stable_hash_u64

NEGATIVE_TIERS = (
    RelationTier.MILDLY_NEGATIVE,
    RelationTier.NEGATIVE,
    RelationTier.STRICTLY_NEGATIVE,
)

# On exhaustion a tier borrows from its neighbours, nearest-by-severity first.
_FALLBACK_CHAIN = {
    RelationTier.MILDLY_NEGATIVE: (
        RelationTier.MILDLY_NEGATIVE,
        RelationTier.NEGATIVE,
        RelationTier.STRICTLY_NEGATIVE,
    ),
    RelationTier.NEGATIVE: (
        RelationTier.NEGATIVE,
        RelationTier.STRICTLY_NEGATIVE,
        RelationTier.MILDLY_NEGATIVE,
    ),
    RelationTier.STRICTLY_NEGATIVE: (
        RelationTier.STRICTLY_NEGATIVE,
        RelationTier.NEGATIVE,
        RelationTier.MILDLY_NEGATIVE,
    ),
}


@dataclass(frozen=True)
class RatioConfig:
    """Negatives generated per positive, by tier."""

    mildly: int = 5
    negative: int = 11
    strictly: int = 24

    def __post_init__(self) -> None:
        if min(self.mildly, self.negative, self.strictly) < 0:
            raise ValueError("ratios must be >= 0")

    @property
    def total(self) -> int:
        return self.mildly + self.negative + self.strictly

    def quota(self, tier: RelationTier) -> int:
        return {
            RelationTier.MILDLY_NEGATIVE: self.mildly,
            RelationTier.NEGATIVE: self.negative,
            RelationTier.STRICTLY_NEGATIVE: self.strictly,
        }[tier]


@dataclass(frozen=True)
class TrainingInstance:
    tokens: tuple[str, ...]
    label: str
    targets: tuple[int, int, int]  # [yT3, yT2, yT1]
    weight: float
    tier: RelationTier
    origin_id: str

    @classmethod
    def make(cls, tokens: Sequence[str], label: str, tier: RelationTier, origin_id: str) -> "TrainingInstance":
        return cls(
            tokens=tuple(tokens),
            label=label,
            targets=tier.target_vector,
            weight=tier.weight,
            tier=tier,
            origin_id=origin_id,
        )


@dataclass
class GenerationReport:
    """Bookkeeping for tier-exhaustion fallbacks (kept out of the instances)."""

    substitutions: dict[str, int]

    def total(self) -> int:
        return sum(self.substitutions.values())


def _draw_tier_labels(
    tier: RelationTier,
    quota: int,
    gold: frozenset[str],
    pools: dict[RelationTier, list[str]],
    rng: np.random.Generator,
    report: GenerationReport,
) -> list[tuple[str, RelationTier]]:
    """Fill one tier's quota from the first non-empty pool in its chain.

    Draws are without replacement while the pool lasts; a pool smaller than
    the quota tops up with replacement rather than borrowing from another
    tier.  Only a fully empty pool (tier exhaustion) falls through, and each
    borrowed draw is counted in the report.
    """
    for actual in _FALLBACK_CHAIN[tier]:
        pool = [lab for lab in pools[actual] if lab not in gold]
        if not pool:
            continue
        if len(pool) >= quota:
            idx = rng.choice(len(pool), size=quota, replace=False)
            chosen = [pool[int(i)] for i in idx]
        else:
            extra = rng.choice(len(pool), size=quota - len(pool), replace=True)
            chosen = list(pool) + [pool[int(i)] for i in extra]
        if actual is not tier:
            key = f"{tier.value}->{actual.value}"
            report.substitutions[key] = report.substitutions.get(key, 0) + len(chosen)
        return [(lab, actual) for lab in chosen]
    return []  # no negative candidates exist at all; degenerate taxonomy


def _instances_for_sample(
    sample,
    tax: Taxonomy,
    ratios: RatioConfig,
    trained: Sequence[str],
    seed: int,
    aug_cfg: AugmentConfig | None,
    lex: SynonymLexicon | None,
    report: GenerationReport,
) -> list[TrainingInstance]:
    out: list[TrainingInstance] = []
    trained_set = set(trained)
    for gold_label in sorted(sample.labels):
        if gold_label not in trained_set:
            # the model cannot score labels it never trained on; heldout
            # samples can carry such gold labels when corpora are tiny
            continue
        rng = np.random.default_rng(stable_hash_u64(seed, sample.id, gold_label))
        out.append(TrainingInstance.make(sample.tokens, gold_label, RelationTier.POSITIVE, sample.id))
        pools = {
            tier: eligible_labels(tier, gold_label, tax, within=trained)
            for tier in NEGATIVE_TIERS
        }
        for tier in NEGATIVE_TIERS:
            quota = ratios.quota(tier)
            if quota == 0:
                continue
            for label, actual in _draw_tier_labels(
                tier, quota, sample.labels, pools, rng, report
            ):
                tokens = sample.tokens
                if aug_cfg is not None:
                    tokens = augment(list(sample.tokens), aug_cfg, lex, rng)
                out.append(TrainingInstance.make(tokens, label, actual, sample.id))
    return out


def generate_training_instances(
    train: Corpus,
    tax: Taxonomy,
    ratios: RatioConfig,
    aug_cfg: AugmentConfig,
    lex: SynonymLexicon,
    seed: int,
    trained: Sequence[str] | None = None,
) -> tuple[list[TrainingInstance], GenerationReport]:
    """Positives plus augmented tiered negatives for every (sample, gold) pair.

    Negative labels come from ``trained`` (default: the labels present in the
    corpus), since the model can only be asked about labels it will know.
    """
    if trained is None:
        trained = train.trained_labels()
    report = GenerationReport(substitutions={})
    instances: list[TrainingInstance] = []
    for sample in train:
        instances.extend(
            _instances_for_sample(sample, tax, ratios, trained, seed, aug_cfg, lex, report)
        )
    return instances, report


def make_test_set_instances(
    eval_set: Corpus,
    tax: Taxonomy,
    ratios: RatioConfig,
    seed: int,
    trained: Sequence[str] | None = None,
) -> tuple[list[TrainingInstance], GenerationReport]:
    """Same pairing as training, but evaluation text is never deformed."""
    if trained is None:
        trained = eval_set.trained_labels()
    report = GenerationReport(substitutions={})
    instances: list[TrainingInstance] = []
    for sample in eval_set:
        instances.extend(
            _instances_for_sample(sample, tax, ratios, trained, seed, None, None, report)
        )
    return instances, report


def multi_gold_tier(label: str, gold: Iterable[str], tax: Taxonomy) -> RelationTier:
    """Least severe relation of ``label`` against any gold label."""
    best: RelationTier | None = None
    for g in gold:
        tier = relation(g, label, tax)
        if best is None or tier.severity < best.severity:
            best = tier
        if best is RelationTier.POSITIVE:
            break
    return best if best is not None else RelationTier.STRICTLY_NEGATIVE


def expand_real_simulation(
    eval_set: Corpus,
    tax: Taxonomy,
    labels: Sequence[str] | None = None,
) -> list[TrainingInstance]:
    """One instance per (sample, trained label); |samples| x |labels| total.

    Targets reflect the whole gold set: a level's target is one when the
    candidate shares that level's ancestor with any gold label.
    """
    if labels is None:
        labels = list(tax.t3_ids)
    instances: list[TrainingInstance] = []
    for sample in eval_set:
        for label in labels:
            tier = multi_gold_tier(label, sample.labels, tax)
            instances.append(TrainingInstance.make(sample.tokens, label, tier, sample.id))
    return instances


def dump_instances(instances: Iterable[TrainingInstance], stream: TextIO) -> int:
    n = 0
    for inst in instances:
        stream.write(
            json.dumps(
                {
                    "origin_id": inst.origin_id,
                    "label": inst.label,
                    "tier": inst.tier.value,
                    "weight": inst.weight,
                    "targets": list(inst.targets),
                    "tokens": list(inst.tokens),
                },
                ensure_ascii=False,
                sort_keys=True,
            )
        )
        stream.write("\n")
        n += 1
    return n
