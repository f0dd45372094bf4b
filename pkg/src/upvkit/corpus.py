"""Annotated interview sentences: ingestion, splitting, support filtering, stats.

Corpus files are JSON-lines with exactly the fields ``id`` (string), ``text``
(string) and ``t3_labels`` (array of label ids or display names); unknown
extra fields are ignored on read so that exports from the annotation service
round-trip.
"""

from __future__ import annotations

import unicodedata
import warnings
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .taxonomy import Taxonomy, normalize_id
from .util import read_jsonl, write_jsonl


class CorpusError(ValueError):
    """Malformed corpus input."""


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[str]:
    """Deterministic rule-based tokenizer.

    Lowercases, splits on whitespace, then detaches leading and trailing
    punctuation characters as single-character tokens.  Interior punctuation
    (apostrophes, hyphens) stays inside the token, so "don't" and
    "mother-in-law" survive intact.
    """
    tokens: list[str] = []
    for chunk in text.lower().split():
        start = 0
        end = len(chunk)
        lead: list[str] = []
        while start < end and _is_punct(chunk[start]):
            lead.append(chunk[start])
            start += 1
        trail: list[str] = []
        while end > start and _is_punct(chunk[end - 1]):
            trail.append(chunk[end - 1])
            end -= 1
        tokens.extend(lead)
        if start < end:
            tokens.append(chunk[start:end])
        tokens.extend(reversed(trail))
    return tokens


@dataclass(frozen=True)
class Sample:
    """One interview sentence with its gold T3 label set."""

    id: str
    text: str
    tokens: tuple[str, ...]
    labels: frozenset[str]


@dataclass(frozen=True)
class Corpus:
    samples: tuple[Sample, ...]
    taxonomy: Taxonomy
    dropped_short: int = 0
    dropped_unlabeled: int = 0
    skipped_unknown_labels: int = 0

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def label_support(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for s in self.samples:
            for lab in s.labels:
                counts[lab] = counts.get(lab, 0) + 1
        return dict(sorted(counts.items()))

    def trained_labels(self) -> list[str]:
        """Labels present in this corpus, in taxonomy order."""
        present = {lab for s in self.samples for lab in s.labels}
        return [t for t in self.taxonomy.t3_ids if t in present]


MIN_TOKENS = 3


def load_corpus(stream: TextIO, tax: Taxonomy, lenient: bool = False) -> Corpus:
    """Parse JSON-lines into a validated :class:`Corpus`.

    Sentences shorter than three tokens or left without a single valid label
    are dropped and counted.  Unknown label ids raise by default; under
    ``lenient`` they are skipped with a warning.
    """
    samples: list[Sample] = []
    seen_ids: set[str] = set()
    dropped_short = dropped_unlabeled = skipped_unknown = 0
    for lineno, obj in read_jsonl(stream):
        try:
            sid = obj["id"]
            text = obj["text"]
            raw_labels = obj["t3_labels"]
        except KeyError as exc:
            raise CorpusError(f"line {lineno}: missing field {exc.args[0]!r}") from None
        if not isinstance(sid, str) or not isinstance(text, str) or not isinstance(raw_labels, list):
            raise CorpusError(f"line {lineno}: wrong field type")
        if sid in seen_ids:
            raise CorpusError(f"line {lineno}: duplicate id {sid!r}")
        seen_ids.add(sid)
        labels: set[str] = set()
        for raw in raw_labels:
            lab = normalize_id(str(raw))
            if lab not in tax:
                if lenient:
                    skipped_unknown += 1
                    warnings.warn(f"line {lineno}: unknown label {raw!r} skipped")
                    continue
                raise CorpusError(f"line {lineno}: unknown label {raw!r}")
            labels.add(lab)
        tokens = tokenize(text)
        if len(tokens) < MIN_TOKENS:
            dropped_short += 1
            continue
        if not labels:
            dropped_unlabeled += 1
            continue
        samples.append(Sample(id=sid, text=text, tokens=tuple(tokens), labels=frozenset(labels)))
    return Corpus(
        samples=tuple(samples),
        taxonomy=tax,
        dropped_short=dropped_short,
        dropped_unlabeled=dropped_unlabeled,
        skipped_unknown_labels=skipped_unknown,
    )


def dump_corpus(corpus: Corpus, stream: TextIO) -> int:
    """Write JSON-lines that :func:`load_corpus` reproduces exactly."""
    return write_jsonl(
        stream,
        ({"id": s.id, "text": s.text, "t3_labels": sorted(s.labels)} for s in corpus.samples),
    )


@dataclass(frozen=True)
class SplitSpec:
    """Train/dev/test partition sizes.

    ``test_count`` is normally derived from what the train fraction leaves
    over; passing it explicitly instead fixes test and gives the remainder
    to train, since split sizes are often quoted as exact counts rather
    than fractions.
    """

    train_fraction: float = 0.8
    dev_count: int = 0
    seed: int = 0
    test_count: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.dev_count < 0:
            raise ValueError("dev_count must be >= 0")


def split(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus, Corpus]:
    """Disjoint, exhaustive, seed-reproducible train/dev/test partition."""
    n = len(corpus)
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(n)
    if spec.test_count is not None:
        if spec.dev_count + spec.test_count > n:
            raise ValueError("dev_count + test_count exceeds corpus size")
        n_train = n - spec.dev_count - spec.test_count
    else:
        n_train = int(n * spec.train_fraction)
        if spec.dev_count > n - n_train:
            raise ValueError("dev_count exceeds heldout size")
    parts = (
        order[:n_train],
        order[n_train : n_train + spec.dev_count],
        order[n_train + spec.dev_count :],
    )

    def take(idx: np.ndarray) -> Corpus:
        return Corpus(samples=tuple(corpus.samples[i] for i in sorted(idx)), taxonomy=corpus.taxonomy)

    return take(parts[0]), take(parts[1]), take(parts[2])


def filter_by_support(corpus: Corpus, min_support: int) -> tuple[Corpus, list[str]]:
    """Drop labels whose support is not strictly above ``min_support``.

    Filtered labels are removed from every sample's label set; samples left
    with no labels are dropped.  Returns the kept corpus and the rejected
    label ids.
    """
    if min_support < 0:
        raise ValueError("min_support must be >= 0")
    support = corpus.label_support()
    rejected = sorted(lab for lab, count in support.items() if count <= min_support)
    if not rejected:
        return corpus, []
    rejected_set = set(rejected)
    kept: list[Sample] = []
    for s in corpus.samples:
        labels = s.labels - rejected_set
        if labels:
            kept.append(Sample(id=s.id, text=s.text, tokens=s.tokens, labels=frozenset(labels)))
    return Corpus(samples=tuple(kept), taxonomy=corpus.taxonomy), rejected


@dataclass(frozen=True)
class CorpusStats:
    """Descriptive statistics: supports, lengths, multi-label shares, co-occurrence."""

    n_samples: int
    support: dict[str, int]
    percent: dict[str, float]
    avg_tokens: float
    multi_label_fraction: float
    over_two_label_fraction: float
    labels: tuple[str, ...]
    cooccurrence: np.ndarray = field(repr=False)


def stats(corpus: Corpus) -> CorpusStats:
    """Exact counts over the corpus.

    The co-occurrence cell (i, j) with i != j counts samples carrying both
    labels; the diagonal stores each label's own support.
    """
    if not corpus.samples:
        raise CorpusError("empty corpus")
    support = corpus.label_support()
    labels = tuple(t for t in corpus.taxonomy.t3_ids if t in support)
    index = {lab: i for i, lab in enumerate(labels)}
    cooc = np.zeros((len(labels), len(labels)), dtype=np.int64)
    n_multi = n_over_two = 0
    total_tokens = 0
    for s in corpus.samples:
        total_tokens += len(s.tokens)
        if len(s.labels) > 1:
            n_multi += 1
        if len(s.labels) > 2:
            n_over_two += 1
        idx = sorted(index[lab] for lab in s.labels)
        for a in idx:
            cooc[a, a] += 1
            for b in idx:
                if b > a:
                    cooc[a, b] += 1
                    cooc[b, a] += 1
    n = len(corpus.samples)
    return CorpusStats(
        n_samples=n,
        support=support,
        percent={lab: 100.0 * c / n for lab, c in support.items()},
        avg_tokens=total_tokens / n,
        multi_label_fraction=n_multi / n,
        over_two_label_fraction=n_over_two / n,
        labels=labels,
        cooccurrence=cooc,
    )


def subset_by_labels(corpus: Corpus, labels: Sequence[str]) -> Corpus:
    """Restrict every sample's gold set to ``labels``, dropping emptied samples."""
    keep = set(labels)
    kept = []
    for s in corpus.samples:
        inter = s.labels & keep
        if inter:
            kept.append(Sample(id=s.id, text=s.text, tokens=s.tokens, labels=frozenset(inter)))
    return Corpus(samples=tuple(kept), taxonomy=corpus.taxonomy)
