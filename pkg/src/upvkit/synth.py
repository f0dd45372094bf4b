"""Deterministic keyword-separable synthetic corpus generator.

Real interview data cannot ship with the toolkit, so tests and demos run on
generated sentences in which every assigned label plants two of its
signature tokens among shared distractor words.  Signature tokens derive
from the label names themselves, which mirrors how real sentences tend to
carry label-specific vocabulary and keeps the task learnable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Sample, tokenize
from .taxonomy import Taxonomy

DISTRACTORS = [
    "the", "a", "we", "they", "people", "here", "there", "very", "much",
    "many", "some", "also", "then", "now", "day", "year", "time", "thing",
    "place", "man", "woman", "person", "give", "take", "make", "come", "go",
    "see", "know", "want", "need", "get", "use", "say", "tell", "live",
    "stay", "keep", "put", "because", "when", "where", "about", "after",
    "before", "with", "without", "other", "own", "every",
]

_SUFFIXES = ("s", "like")


@dataclass(frozen=True)
class KeywordTable:
    """Signature tokens per T3 label plus a shared distractor vocabulary."""

    signatures: dict[str, tuple[str, ...]]
    distractors: tuple[str, ...]

    def __post_init__(self) -> None:
        marked = {tok for sig in self.signatures.values() for tok in sig}
        for label, sig in self.signatures.items():
            if len(sig) < 3:
                raise ValueError(f"label {label!r} needs >= 3 signature tokens")
        clash = marked & set(self.distractors)
        if clash:
            raise ValueError(f"distractors collide with signature tokens: {sorted(clash)[:5]}")


def default_keyword_table(tax: Taxonomy) -> KeywordTable:
    """Derive signatures from label-name tokens plus suffixed variants."""
    signatures: dict[str, tuple[str, ...]] = {}
    for node in tax.nodes:
        base = [t for t in node.name_tokens(max_tokens=4) if len(t) >= 3]
        if not base:
            base = node.name_tokens(max_tokens=4)
        sig = list(base)
        for suffix in _SUFFIXES:
            for tok in base:
                if len(sig) >= max(3, len(base)):
                    break
                variant = tok + suffix
                if variant not in sig:
                    sig.append(variant)
        for tok in base:
            variant = tok + "s" if not tok.endswith("s") else tok + "es"
            if variant not in sig:
                sig.append(variant)
        signatures[node.t3] = tuple(sig[:6])
    marked = {tok for sig in signatures.values() for tok in sig}
    distractors = tuple(d for d in DISTRACTORS if d not in marked)
    return KeywordTable(signatures=signatures, distractors=distractors)


def synth_corpus(
    tax: Taxonomy,
    seed: int,
    samples_per_label: int,
    table: KeywordTable | None = None,
    multi_label_fraction: float = 0.15,
) -> Corpus:
    """Generate ``samples_per_label`` sentences anchored on every T3 label.

    A fraction of samples receives one (rarely two) extra labels, so label
    supports end up at or above ``samples_per_label``.  Byte-identical output
    under a fixed seed.
    """
    if table is None:
        table = default_keyword_table(tax)
    missing = [t for t in tax.t3_ids if t not in table.signatures]
    if missing:
        raise ValueError(f"keyword table missing labels: {missing[:5]}")
    rng = np.random.default_rng(seed)
    all_labels = list(tax.t3_ids)
    samples: list[Sample] = []
    counter = 0
    for anchor in all_labels:
        for _ in range(samples_per_label):
            labels = [anchor]
            if rng.random() < multi_label_fraction:
                n_extra = 2 if rng.random() < 0.2 else 1
                others = [t for t in all_labels if t != anchor]
                picks = rng.choice(len(others), size=n_extra, replace=False)
                labels.extend(others[int(i)] for i in picks)
            tokens: list[str] = []
            for lab in labels:
                sig = table.signatures[lab]
                picks = rng.choice(len(sig), size=min(3, len(sig)), replace=False)
                tokens.extend(sig[int(i)] for i in picks)
            n_fill = int(rng.integers(3, 8))
            fill = rng.choice(len(table.distractors), size=n_fill, replace=True)
            tokens.extend(table.distractors[int(i)] for i in fill)
            order = rng.permutation(len(tokens))
            tokens = [tokens[int(i)] for i in order]
            counter += 1
            samples.append(
                Sample(
                    id=f"syn-{counter:05d}",
                    text=" ".join(tokens),
                    tokens=tuple(tokens),
                    labels=frozenset(labels),
                )
            )
    corpus = Corpus(samples=tuple(samples), taxonomy=tax)
    _audit(corpus, table, samples_per_label)
    return corpus


def _audit(corpus: Corpus, table: KeywordTable, samples_per_label: int) -> None:
    """Generator self-check: supports, token floors, signature presence."""
    support = corpus.label_support()
    for label in corpus.taxonomy.t3_ids:
        if support.get(label, 0) < samples_per_label:
            raise AssertionError(f"label {label!r} support {support.get(label, 0)} < {samples_per_label}")
    for s in corpus.samples:
        if len(s.tokens) < 3:
            raise AssertionError(f"sample {s.id} has fewer than 3 tokens")
        if tuple(tokenize(s.text)) != s.tokens:
            raise AssertionError(f"sample {s.id} text does not re-tokenize to its tokens")
        toks = set(s.tokens)
        for lab in s.labels:
            if not toks & set(table.signatures[lab]):
                raise AssertionError(f"sample {s.id} lacks signature tokens for {lab!r}")
