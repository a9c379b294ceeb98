"""Translation quality scoring: BLEU, GLEU, and file-level reports.

Two BLEU conventions live here. Corpus mode is standard BLEU-4: clipped
n-gram precisions pooled over the corpus, geometric mean, brevity
penalty, 0-100 scale. Sentence mode is clipped unigram precision on the
0-1 scale with no brevity penalty; that is the convention under which
the published per-sentence scores (e.g. "va viens" vs "va et viens"
scoring 1.0) are exactly reproducible.

GLEU pools clipped 1..4-gram matches per pair across the corpus and
takes min(precision, recall).
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import (
    DomainError,
    EmptyHypothesisError,
    LengthMismatchError,
    LineCountMismatchError,
)
from .tokenizer import DiacriticMode, tokenize


class Scale(Enum):
    UNIT = "unit"
    PERCENT = "percent"


@dataclass(frozen=True)
class BleuConfig:
    max_n: int = 4
    use_brevity_penalty: bool = True
    scale: Scale = Scale.PERCENT
    smoothing: bool = False  # add-one on zero-match orders above unigram

    def __post_init__(self):
        if self.max_n < 1:
            raise DomainError("max_n must be >= 1")


def ngram_multiset(tokens, n: int) -> Counter:
    """All contiguous n-token windows with multiplicity."""
    if n < 1:
        raise DomainError("n must be >= 1")
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def clipped_precision(hyp_tokens, ref_tokens, n: int) -> tuple[int, int]:
    """(matched, total): hypothesis n-grams clipped by reference counts."""
    hyp_grams = ngram_multiset(hyp_tokens, n)
    ref_grams = ngram_multiset(ref_tokens, n)
    matched = sum(min(count, ref_grams[gram]) for gram, count in hyp_grams.items())
    return matched, sum(hyp_grams.values())


def _check_aligned(hyps, refs):
    if len(hyps) != len(refs):
        raise LengthMismatchError(
            f"{len(hyps)} hypotheses vs {len(refs)} references"
        )
    if not hyps:
        raise DomainError("need at least one sentence pair")


def bleu_corpus(hyps: list, refs: list, config: BleuConfig | None = None) -> float:
    """Corpus BLEU over token-sequence lists.

    Counts are pooled over the corpus before any division. Orders where
    the hypothesis corpus has no n-grams at all are left out of the
    geometric mean, so identical corpora score the maximum regardless of
    sentence lengths; an order with hypothesis n-grams but zero matches
    still zeroes the score (unless smoothing is on).
    """
    config = config or BleuConfig()
    _check_aligned(hyps, refs)
    c = sum(len(h) for h in hyps)
    r = sum(len(t) for t in refs)
    if c == 0:
        return 0.0
    log_sum = 0.0
    n_orders = 0
    for n in range(1, config.max_n + 1):
        matched = 0
        total = 0
        for hyp, ref in zip(hyps, refs):
            m, t = clipped_precision(hyp, ref, n)
            matched += m
            total += t
        if total == 0:
            continue
        if matched == 0:
            if config.smoothing and n > 1:
                matched, total = 1, total + 1
            else:
                return 0.0
        log_sum += math.log(matched / total)
        n_orders += 1
    if n_orders == 0:
        return 0.0
    score = math.exp(log_sum / n_orders)
    if config.use_brevity_penalty and c < r:
        score *= math.exp(1.0 - r / c)
    return score * 100.0 if config.scale is Scale.PERCENT else score


def bleu_sentence(hyp_tokens, ref_tokens) -> float:
    """Clipped unigram precision in [0, 1], no brevity penalty."""
    if not hyp_tokens:
        raise EmptyHypothesisError("hypothesis has no tokens")
    matched, total = clipped_precision(hyp_tokens, ref_tokens, 1)
    return matched / total


def gleu(hyps: list, refs: list, max_n: int = 4,
         scale: Scale = Scale.PERCENT) -> float:
    """Min of pooled n-gram precision and recall, orders 1..max_n.

    Matches are clipped pair by pair; matched/total counts are then
    pooled over all pairs and orders before the final division.
    """
    if max_n < 1:
        raise DomainError("max_n must be >= 1")
    _check_aligned(hyps, refs)
    matched = 0
    hyp_total = 0
    ref_total = 0
    for hyp, ref in zip(hyps, refs):
        for n in range(1, max_n + 1):
            m, t = clipped_precision(hyp, ref, n)
            matched += m
            hyp_total += t
            ref_total += max(len(ref) - n + 1, 0)
    if hyp_total == 0 or ref_total == 0:
        return 0.0
    score = min(matched / hyp_total, matched / ref_total)
    return score * 100.0 if scale is Scale.PERCENT else score


@dataclass
class EvaluationReport:
    """Scores for one hypothesis/reference file pair.

    `precisions[n-1]` is the pooled order-n precision, None when the
    hypothesis corpus has no n-grams of that order. `sentence_scores`
    is filled in sentence mode only; `bleu` is then their mean.
    """

    mode: str  # "corpus" or "sentence"
    n_sentences: int
    bleu: float | None = None
    gleu: float | None = None
    precisions: list = field(default_factory=list)
    sentence_scores: list | None = None

    def __post_init__(self):
        limit = 100.0 if self.mode == "corpus" else 1.0
        for value in (self.bleu, self.gleu):
            if value is not None and not 0.0 <= value <= limit:
                raise DomainError(f"score {value} outside [0, {limit}]")

    def to_json_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "n_sentences": self.n_sentences,
            "bleu": self.bleu,
            "gleu": self.gleu,
            "precisions": self.precisions,
        }
        if self.sentence_scores is not None:
            out["sentence_scores"] = self.sentence_scores
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)

    def to_text(self) -> str:
        lines = []
        if self.sentence_scores is not None:
            for i, score in enumerate(self.sentence_scores):
                lines.append(f"{i}\t{score:.2f}")
            lines.append("")
            lines.append(f"Mean sentence BLEU: {self.bleu:.2f}")
            lines.append(f"Sentences: {self.n_sentences}")
            return "\n".join(lines) + "\n"
        headers = []
        values = []
        if self.bleu is not None:
            headers.append("BLEU")
            values.append(f"{self.bleu:.2f}")
        if self.gleu is not None:
            headers.append("GLEU")
            values.append(f"{self.gleu:.2f}")
        widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
        lines.append(
            "  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()
        )
        lines.append(
            "  ".join(v.ljust(w) for v, w in zip(values, widths)).rstrip()
        )
        lines.append("")
        lines.append(f"Sentences: {self.n_sentences}")
        return "\n".join(lines) + "\n"


def _read_lines(path: str | Path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    if text.startswith("﻿"):
        text = text[1:]
    return text.splitlines()


def _tokenize_line(line: str, mode: DiacriticMode) -> list[str]:
    # a blank line is a legitimate empty hypothesis, not an error
    if not line.strip():
        return []
    return tokenize(line, mode)


def evaluate_files(
    hyp_path: str | Path,
    ref_path: str | Path,
    mode: str = "corpus",
    diacritics: DiacriticMode = DiacriticMode.PRESERVE,
    metric: str = "both",
) -> EvaluationReport:
    """Score two line-aligned UTF-8 files.

    Corpus mode computes BLEU and/or GLEU over the whole file pair;
    sentence mode scores each line with the unigram convention (an
    empty hypothesis line scores 0.0).
    """
    hyp_lines = _read_lines(hyp_path)
    ref_lines = _read_lines(ref_path)
    if len(hyp_lines) != len(ref_lines):
        raise LineCountMismatchError(
            f"{len(hyp_lines)} hypothesis lines vs {len(ref_lines)} reference lines"
        )
    hyps = [_tokenize_line(line, diacritics) for line in hyp_lines]
    refs = [_tokenize_line(line, diacritics) for line in ref_lines]

    if mode == "sentence":
        scores = [
            bleu_sentence(h, r) if h else 0.0 for h, r in zip(hyps, refs)
        ]
        mean = sum(scores) / len(scores) if scores else 0.0
        return EvaluationReport(
            mode="sentence",
            n_sentences=len(scores),
            bleu=mean,
            sentence_scores=scores,
        )
    if mode != "corpus":
        raise DomainError(f"unknown evaluation mode {mode!r}")
    if metric not in ("bleu", "gleu", "both"):
        raise DomainError(f"unknown metric {metric!r}")

    config = BleuConfig()
    precisions: list[float | None] = []
    for n in range(1, config.max_n + 1):
        matched = sum(clipped_precision(h, r, n)[0] for h, r in zip(hyps, refs))
        total = sum(clipped_precision(h, r, n)[1] for h, r in zip(hyps, refs))
        precisions.append(matched / total if total else None)
    return EvaluationReport(
        mode="corpus",
        n_sentences=len(hyps),
        bleu=bleu_corpus(hyps, refs, config) if metric in ("bleu", "both") else None,
        gleu=gleu(hyps, refs) if metric in ("gleu", "both") else None,
        precisions=precisions,
    )
