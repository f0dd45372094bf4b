"""Sentence deformation for generated negatives: four word-level edits plus
character swapping.

All transforms are pure functions of (tokens, config, lexicon, rng) and obey
hard structural guarantees: deletion never empties a sentence, swap preserves
the token multiset, char_swap preserves lengths.  When a transform cannot
change anything it returns the input with ``changed=False`` instead of
raising.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, TextIO

import numpy as np


class Transform(enum.Enum):
    DELETION = "deletion"
    SWAP = "swap"
    INSERTION = "insertion"
    SYNONYM = "synonym"
    CHAR_SWAP = "char_swap"


ALL_TRANSFORMS = tuple(Transform)


class LexiconError(ValueError):
    pass


@dataclass(frozen=True)
class SynonymLexicon:
    """Token to replacement-token mapping; no token maps to itself."""

    entries: dict[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        for token, syns in self.entries.items():
            if not syns:
                raise LexiconError(f"empty synonym list for {token!r}")
            if token in syns:
                raise LexiconError(f"token {token!r} listed as its own synonym")

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def load_synonyms(stream: TextIO) -> SynonymLexicon:
    """Parse ``token<TAB>syn1,syn2,...`` lines; ``#`` comments allowed."""
    entries: dict[str, tuple[str, ...]] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "\t" not in line:
            raise LexiconError(f"line {lineno}: expected token<TAB>synonyms")
        token, _, rest = line.partition("\t")
        token = token.strip()
        syns = tuple(s.strip() for s in rest.split(",") if s.strip())
        if not token or not syns:
            raise LexiconError(f"line {lineno}: empty token or synonym list")
        if token in syns:
            raise LexiconError(f"line {lineno}: {token!r} listed as its own synonym")
        entries[token] = syns
    return SynonymLexicon(entries)


def default_synonyms() -> SynonymLexicon:
    text = resources.files("upvkit.data").joinpath("synonyms.txt").read_text("utf-8")
    return load_synonyms(iter(text.splitlines(keepends=True)))


def load_stopwords(stream: Iterable[str]) -> frozenset[str]:
    words = set()
    for raw in stream:
        line = raw.strip()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def default_stopwords() -> frozenset[str]:
    text = resources.files("upvkit.data").joinpath("stopwords.txt").read_text("utf-8")
    return load_stopwords(text.splitlines())


@dataclass(frozen=True)
class AugmentConfig:
    """Strength is the fraction of tokens touched per edit (at least one)."""

    strength: float = 0.1
    kinds: tuple[Transform, ...] = ALL_TRANSFORMS
    stacked: int = 1
    stopwords: frozenset[str] = field(default_factory=default_stopwords)

    def __post_init__(self) -> None:
        if not 0.0 < self.strength <= 1.0:
            raise ValueError("strength must be in (0, 1]")
        if not self.kinds:
            raise ValueError("at least one transform kind required")
        if self.stacked < 1:
            raise ValueError("stacked must be >= 1")


def _edit_count(strength: float, n: int) -> int:
    return max(1, int(strength * n))


def eda_transform(
    tokens: list[str],
    kind: Transform,
    cfg: AugmentConfig,
    lex: SynonymLexicon,
    rng: np.random.Generator,
) -> tuple[list[str], bool]:
    """Apply one transform; returns (new_tokens, changed).

    ``changed`` is False when no edit was possible (e.g. char_swap with all
    tokens shorter than three characters), in which case the input is
    returned untouched.
    """
    if not tokens:
        return list(tokens), False
    n = len(tokens)
    k = _edit_count(cfg.strength, n)

    if kind is Transform.DELETION:
        if n == 1:
            return list(tokens), False
        k = min(k, n - 1)  # never empty the sentence
        drop = set(int(i) for i in rng.choice(n, size=k, replace=False))
        return [t for i, t in enumerate(tokens) if i not in drop], True

    if kind is Transform.SWAP:
        if n < 2:
            return list(tokens), False
        out = list(tokens)
        for _ in range(k):
            i, j = (int(x) for x in rng.choice(n, size=2, replace=False))
            out[i], out[j] = out[j], out[i]
        return out, True

    if kind is Transform.INSERTION:
        covered = [t for t in tokens if t in lex]
        if not covered:
            return list(tokens), False
        out = list(tokens)
        for _ in range(k):
            src = covered[int(rng.integers(len(covered)))]
            syns = lex.entries[src]
            syn = syns[int(rng.integers(len(syns)))]
            pos = int(rng.integers(len(out) + 1))
            out.insert(pos, syn)
        return out, True

    if kind is Transform.SYNONYM:
        eligible = [i for i, t in enumerate(tokens) if t in lex and t not in cfg.stopwords]
        if not eligible:
            return list(tokens), False
        k = min(k, len(eligible))
        picks = rng.choice(len(eligible), size=k, replace=False)
        out = list(tokens)
        for p in picks:
            i = eligible[int(p)]
            syns = lex.entries[tokens[i]]
            out[i] = syns[int(rng.integers(len(syns)))]
        return out, True

    if kind is Transform.CHAR_SWAP:
        candidates = [i for i, t in enumerate(tokens) if len(t) >= 3]
        if not candidates:
            return list(tokens), False
        i = candidates[int(rng.integers(len(candidates)))]
        tok = tokens[i]
        j = int(rng.integers(len(tok) - 1))
        out = list(tokens)
        out[i] = tok[:j] + tok[j + 1] + tok[j] + tok[j + 2 :]
        # identical adjacent characters would be a silent no-op; report it
        changed = out[i] != tok
        return out, changed

    raise ValueError(f"unknown transform {kind!r}")


def augment(
    tokens: list[str],
    cfg: AugmentConfig,
    lex: SynonymLexicon,
    rng: np.random.Generator,
) -> list[str]:
    """Apply ``cfg.stacked`` transforms, each drawn uniformly from ``cfg.kinds``.

    Falls through to the untouched input when every attempted kind is a no-op.
    """
    out = list(tokens)
    for _ in range(cfg.stacked):
        kind = cfg.kinds[int(rng.integers(len(cfg.kinds)))]
        out, _ = eda_transform(out, kind, cfg, lex, rng)
    return out
