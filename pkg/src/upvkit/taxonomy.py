"""Three-tier value taxonomy: loading, validation, and label-pair relations.

The hierarchy has three tiers: T1 pillars contain T2 groups, T2 groups
contain T3 leaf values.  Classifiers score (sentence, T3) pairs, and the
relation between a candidate T3 and a gold T3 determines how negative a
generated training pair is (:class:`RelationTier`).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence, TextIO

import numpy as np


class TaxonomyError(ValueError):
    """Malformed or inconsistent taxonomy input."""


class UnknownLabelError(KeyError):
    """A label id that does not exist in the taxonomy."""


class TierExhaustedError(RuntimeError):
    """No label satisfies the requested relation tier for the given anchor."""


def normalize_id(name: str) -> str:
    """Canonical id for a display name: lowercase, spaces to underscores."""
    return "_".join(name.strip().lower().split())


class RelationTier(enum.Enum):
    """How a candidate T3 relates to a gold T3, from match to full mismatch.

    ``target_vector`` gives the per-level training targets [yT3, yT2, yT1]
    and ``weight`` the per-instance loss weight.
    """

    POSITIVE = "positive"
    MILDLY_NEGATIVE = "mildly_negative"
    NEGATIVE = "negative"
    STRICTLY_NEGATIVE = "strictly_negative"

    @property
    def target_vector(self) -> tuple[int, int, int]:
        return _TARGETS[self]

    @property
    def weight(self) -> float:
        return 0.5 if self is RelationTier.MILDLY_NEGATIVE else 1.0

    @property
    def severity(self) -> int:
        """0 for positive, rising to 3 for strictly negative."""
        return _SEVERITY[self]


_TARGETS = {
    RelationTier.POSITIVE: (1, 1, 1),
    RelationTier.MILDLY_NEGATIVE: (0, 1, 1),
    RelationTier.NEGATIVE: (0, 0, 1),
    RelationTier.STRICTLY_NEGATIVE: (0, 0, 0),
}
_SEVERITY = {
    RelationTier.POSITIVE: 0,
    RelationTier.MILDLY_NEGATIVE: 1,
    RelationTier.NEGATIVE: 2,
    RelationTier.STRICTLY_NEGATIVE: 3,
}


@dataclass(frozen=True)
class LabelNode:
    """One T3 leaf value with its T2 group and T1 pillar."""

    t3: str
    name: str
    t2: str
    t2_name: str
    t1: str
    t1_name: str
    description: str

    def name_tokens(self, max_tokens: int = 4) -> list[str]:
        """Lowercased display-name tokens, truncated to ``max_tokens``."""
        return self.name.lower().split()[:max_tokens]


@dataclass(frozen=True)
class Taxonomy:
    """Immutable label hierarchy with precomputed tier indexes."""

    nodes: tuple[LabelNode, ...]
    by_t3: dict[str, LabelNode] = field(repr=False)
    t2_to_t1: dict[str, str] = field(repr=False)
    t2_members: dict[str, tuple[str, ...]] = field(repr=False)
    t1_members: dict[str, tuple[str, ...]] = field(repr=False)

    @property
    def t3_ids(self) -> tuple[str, ...]:
        return tuple(n.t3 for n in self.nodes)

    @property
    def t2_ids(self) -> tuple[str, ...]:
        return tuple(self.t2_members)

    @property
    def t1_ids(self) -> tuple[str, ...]:
        return tuple(self.t1_members)

    def node(self, t3: str) -> LabelNode:
        try:
            return self.by_t3[t3]
        except KeyError:
            raise UnknownLabelError(t3) from None

    def __contains__(self, t3: str) -> bool:
        return t3 in self.by_t3

    def __len__(self) -> int:
        return len(self.nodes)


def _build(nodes: Sequence[LabelNode]) -> Taxonomy:
    by_t3: dict[str, LabelNode] = {}
    t2_to_t1: dict[str, str] = {}
    t2_members: dict[str, list[str]] = {}
    t1_members: dict[str, list[str]] = {}
    for node in nodes:
        if node.t3 in by_t3:
            raise TaxonomyError(f"duplicate t3 id {node.t3!r}")
        by_t3[node.t3] = node
        if node.t2 in t2_to_t1 and t2_to_t1[node.t2] != node.t1:
            raise TaxonomyError(
                f"t2 group {node.t2!r} assigned to two t1 pillars "
                f"({t2_to_t1[node.t2]!r} and {node.t1!r})"
            )
        t2_to_t1[node.t2] = node.t1
        t2_members.setdefault(node.t2, []).append(node.t3)
        if node.t2 not in t1_members.setdefault(node.t1, []):
            t1_members[node.t1].append(node.t2)
    return Taxonomy(
        nodes=tuple(nodes),
        by_t3=by_t3,
        t2_to_t1=t2_to_t1,
        t2_members={k: tuple(v) for k, v in t2_members.items()},
        t1_members={k: tuple(v) for k, v in t1_members.items()},
    )


def parse_taxonomy(lines: Iterable[str]) -> Taxonomy:
    """Parse the pipe-delimited format: ``t1 | t2 | t3 | description``.

    ``#`` starts a comment line.  Raises :class:`TaxonomyError` with the
    offending line number on any malformed row.
    """
    nodes: list[LabelNode] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split("|")]
        if len(fields) != 4:
            raise TaxonomyError(
                f"line {lineno}: expected 4 pipe-separated fields, got {len(fields)}"
            )
        t1_name, t2_name, t3_name, description = fields
        if not t1_name or not t2_name:
            raise TaxonomyError(f"line {lineno}: t3 {t3_name!r} has a missing parent")
        if not t3_name:
            raise TaxonomyError(f"line {lineno}: empty t3 name")
        if not description:
            raise TaxonomyError(f"line {lineno}: empty description for {t3_name!r}")
        node = LabelNode(
            t3=normalize_id(t3_name),
            name=t3_name,
            t2=normalize_id(t2_name),
            t2_name=t2_name,
            t1=normalize_id(t1_name),
            t1_name=t1_name,
            description=description,
        )
        if any(node.t3 == seen.t3 for seen in nodes):
            raise TaxonomyError(f"line {lineno}: duplicate t3 id {node.t3!r}")
        nodes.append(node)
    if not nodes:
        raise TaxonomyError("no labels")
    return _build(nodes)


def load_taxonomy(source: str | TextIO) -> Taxonomy:
    """Load a taxonomy from a file path or an open text stream."""
    if isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            return parse_taxonomy(fh)
    return parse_taxonomy(source)


def default_taxonomy() -> Taxonomy:
    """The taxonomy bundled with the package (57 values, 17 groups, 6 pillars)."""
    text = resources.files("upvkit.data").joinpath("upv_taxonomy.txt").read_text("utf-8")
    return parse_taxonomy(text.splitlines())


def serialize_taxonomy(tax: Taxonomy) -> str:
    """Render back to the pipe-delimited format; parseable by :func:`parse_taxonomy`."""
    lines = [
        f"{n.t1_name} | {n.t2_name} | {n.name} | {n.description}" for n in tax.nodes
    ]
    return "\n".join(lines) + "\n"


def relation(a: str, b: str, tax: Taxonomy) -> RelationTier:
    """Relation tier of candidate ``b`` against gold ``a``.

    Same T3 is positive, same T2 mildly negative, same T1 negative, and a
    different T1 strictly negative.  Symmetric in its arguments.
    """
    na, nb = tax.node(a), tax.node(b)
    if na.t3 == nb.t3:
        return RelationTier.POSITIVE
    if na.t2 == nb.t2:
        return RelationTier.MILDLY_NEGATIVE
    if na.t1 == nb.t1:
        return RelationTier.NEGATIVE
    return RelationTier.STRICTLY_NEGATIVE


def eligible_labels(
    tier: RelationTier,
    anchor: str,
    tax: Taxonomy,
    within: Sequence[str] | None = None,
) -> list[str]:
    """All labels whose relation to ``anchor`` is ``tier``, in taxonomy order.

    ``within`` restricts the candidate pool (e.g. to trained labels).
    """
    pool = tax.t3_ids if within is None else [t for t in within if t in tax]
    return [t for t in pool if relation(anchor, t, tax) is tier]


def sample_label(
    tier: RelationTier,
    anchor: str,
    rng: np.random.Generator,
    tax: Taxonomy,
    within: Sequence[str] | None = None,
) -> str:
    """Draw one label uniformly among those in ``tier`` relative to ``anchor``.

    Raises :class:`TierExhaustedError` when no label qualifies (e.g. the
    anchor is the only member of its T2 group and the tier asks for a
    same-group mismatch); callers decide the fallback policy.
    """
    pool = eligible_labels(tier, anchor, tax, within)
    if not pool:
        raise TierExhaustedError(f"no {tier.value} label for anchor {anchor!r}")
    return pool[int(rng.integers(len(pool)))]
