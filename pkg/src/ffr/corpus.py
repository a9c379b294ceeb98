"""Parallel corpus loading, length statistics, and deterministic splits.

The corpus file format is single-tab TSV, UTF-8, one pair per line:
``source<TAB>target``. Tabs inside sentences are unrepresentable; such
lines are rejected. Blank lines are skipped for tolerant ingestion of
hand-edited files.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import DomainError, EmptyCorpusError, FormatError, SizeError
from .rng import Rng
from .tokenizer import normalize


@dataclass(frozen=True)
class SentencePair:
    id: int
    source: str
    target: str

    def __post_init__(self):
        if self.id < 0:
            raise ValueError("pair id must be non-negative")
        if not self.source.strip() or not self.target.strip():
            raise ValueError("source and target must be non-empty")


@dataclass
class ParallelCorpus:
    """Ordered sentence pairs. Loading assigns ids 0..n-1 by line order;
    corpora produced by :func:`split` keep the original ids, so the three
    parts of a split stay disjoint by id."""

    pairs: list[SentencePair]
    provenance: list[tuple[str, float]] | None = None

    def __post_init__(self):
        ids = [p.id for p in self.pairs]
        if len(set(ids)) != len(ids):
            raise ValueError("pair ids must be unique")
        if self.provenance is not None:
            total = sum(frac for _, frac in self.provenance)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"provenance fractions sum to {total}, not 1.0")

    def __len__(self) -> int:
        return len(self.pairs)


class LengthBucket(Enum):
    VERY_SHORT = "very_short"  # 1-5 words
    SHORT = "short"            # 6-10 words
    MEDIUM = "medium"          # 11-30 words
    LONG = "long"              # 31+ words


BUCKET_LABELS = {
    LengthBucket.VERY_SHORT: "Very short sentences (1-5 words)",
    LengthBucket.SHORT: "Short sentences (6-10 words)",
    LengthBucket.MEDIUM: "Medium sentences (11-30 words)",
    LengthBucket.LONG: "Long sentences (31+ words)",
}


@dataclass
class CorpusStats:
    pair_count: int
    bucket_counts_source: dict[LengthBucket, int]
    bucket_counts_target: dict[LengthBucket, int]
    max_len_source: int
    max_len_target: int

    def to_json_dict(self) -> dict:
        return {
            "pair_count": self.pair_count,
            "buckets": {
                "source": {b.value: self.bucket_counts_source[b] for b in LengthBucket},
                "target": {b.value: self.bucket_counts_target[b] for b in LengthBucket},
            },
            "max_len": {"source": self.max_len_source, "target": self.max_len_target},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)

    def to_text(self) -> str:
        """Plain-text table: one row per length bucket plus max lengths."""
        rows = [("Sentences", "Source", "Target")]
        for b in LengthBucket:
            rows.append(
                (
                    BUCKET_LABELS[b],
                    str(self.bucket_counts_source[b]),
                    str(self.bucket_counts_target[b]),
                )
            )
        rows.append(("Maximum sentence length (words)",
                     str(self.max_len_source), str(self.max_len_target)))
        rows.append(("Total pairs", str(self.pair_count), ""))
        w0 = max(len(r[0]) for r in rows)
        w1 = max(len(r[1]) for r in rows)
        w2 = max(len(r[2]) for r in rows)
        lines = [f"{r[0]:<{w0}}  {r[1]:>{w1}}  {r[2]:>{w2}}".rstrip() for r in rows]
        return "\n".join(lines)


@dataclass(frozen=True)
class SplitSpec:
    train_n: int
    val_n: int
    test_n: int
    seed: int = 0

    def __post_init__(self):
        if min(self.train_n, self.val_n, self.test_n) <= 0:
            raise ValueError("split sizes must be positive")


def load_corpus(path: str | Path) -> ParallelCorpus:
    """Read a TSV corpus; ids follow line order, blank lines are skipped."""
    text = Path(path).read_text(encoding="utf-8")
    if text.startswith("﻿"):
        text = text[1:]
    pairs: list[SentencePair] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        ntabs = line.count("\t")
        if ntabs != 1:
            raise FormatError(line_no, f"expected exactly one tab, got {ntabs}")
        source, target = line.split("\t")
        source = normalize(source.strip())
        target = normalize(target.strip())
        if not source or not target:
            raise FormatError(line_no, "empty source or target side")
        pairs.append(SentencePair(id=len(pairs), source=source, target=target))
    return ParallelCorpus(pairs)


def save_corpus(corpus: ParallelCorpus, path: str | Path) -> None:
    lines = [f"{p.source}\t{p.target}" for p in corpus.pairs]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def word_count(sentence: str) -> int:
    """Number of maximal non-whitespace runs."""
    if not sentence.strip():
        raise DomainError("cannot count words of empty text")
    return len(sentence.split())


def bucket(count: int) -> LengthBucket:
    if count < 1:
        raise DomainError(f"word count must be >= 1, got {count}")
    if count <= 5:
        return LengthBucket.VERY_SHORT
    if count <= 10:
        return LengthBucket.SHORT
    if count <= 30:
        return LengthBucket.MEDIUM
    return LengthBucket.LONG


def analyze(corpus: ParallelCorpus) -> CorpusStats:
    """Per-side bucket histogram and maximum word counts."""
    if not corpus.pairs:
        raise EmptyCorpusError("cannot analyze an empty corpus")
    src_counts: Counter[LengthBucket] = Counter()
    tgt_counts: Counter[LengthBucket] = Counter()
    max_src = 0
    max_tgt = 0
    for pair in corpus.pairs:
        ns = word_count(pair.source)
        nt = word_count(pair.target)
        src_counts[bucket(ns)] += 1
        tgt_counts[bucket(nt)] += 1
        max_src = max(max_src, ns)
        max_tgt = max(max_tgt, nt)
    return CorpusStats(
        pair_count=len(corpus.pairs),
        bucket_counts_source={b: src_counts.get(b, 0) for b in LengthBucket},
        bucket_counts_target={b: tgt_counts.get(b, 0) for b in LengthBucket},
        max_len_source=max_src,
        max_len_target=max_tgt,
    )


def split(
    corpus: ParallelCorpus, spec: SplitSpec
) -> tuple[ParallelCorpus, ParallelCorpus, ParallelCorpus]:
    """Seeded shuffle, then consecutive train/val/test slices.

    Deterministic: the same (corpus, spec) always yields identical splits.
    Output pairs keep their original ids.
    """
    n = len(corpus.pairs)
    total = spec.train_n + spec.val_n + spec.test_n
    if total > n:
        raise SizeError(f"split sizes sum to {total} but corpus has {n} pairs")
    order = list(range(n))
    Rng(spec.seed).shuffle(order)
    picked = [corpus.pairs[i] for i in order]
    train = ParallelCorpus(picked[: spec.train_n])
    val = ParallelCorpus(picked[spec.train_n : spec.train_n + spec.val_n])
    test = ParallelCorpus(picked[spec.train_n + spec.val_n : total])
    return train, val, test
