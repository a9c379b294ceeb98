"""Shared builders and independent oracles for the test suite.

The oracles deliberately avoid the library's own metric and counting
code: plain dict/loop implementations the tests compare against.
"""

from __future__ import annotations

import math

from ffr.corpus import ParallelCorpus, SentencePair
from ffr.rng import Rng

# -- overfit corpus: word-for-word mapping, lengths 4-6 -------------------

OVERFIT_SRC_WORDS = ["azɔ", "fí", "gbè", "hwe", "jí", "kpɔ", "lan", "mɛ",
                     "nu", "wa"]
OVERFIT_TGT_WORDS = ["arbre", "bras", "chien", "eau", "feu", "lune", "main",
                     "nuit", "pain", "vent"]


def overfit_corpus(seed: int = 13, n_pairs: int = 32) -> ParallelCorpus:
    rng = Rng(seed)
    seen = set()
    pairs = []
    while len(pairs) < n_pairs:
        length = 4 + rng.below(3)
        idx = tuple(rng.below(len(OVERFIT_SRC_WORDS)) for _ in range(length))
        if idx in seen:
            continue
        seen.add(idx)
        pairs.append(
            SentencePair(
                len(pairs),
                " ".join(OVERFIT_SRC_WORDS[i] for i in idx),
                " ".join(OVERFIT_TGT_WORDS[i] for i in idx),
            )
        )
    return ParallelCorpus(pairs)


# -- ablation corpus: sources differing only by an acute accent ----------

ABLATION_BASES = ["hɔn", "ka", "gbe", "wa", "sa", "do", "ji", "lo", "mi",
                  "nu", "su", "ta", "we", "xo", "yi", "zo", "bo", "fi",
                  "gu", "de"]
_ACUTE = {"a": "á", "e": "é", "i": "í", "o": "ó", "u": "ú",
          "ɔ": "ɔ́", "ɛ": "ɛ́"}
ABLATION_TARGETS_MARKED = [
    "porte", "scorpion", "langue", "viens", "oindre", "planter", "oiseau",
    "perroquet", "avaler", "boire", "laver", "tete", "deux", "parole",
    "partir", "feu", "alors", "ici", "mur", "chose",
]
ABLATION_TARGETS_BARE = [
    "fuire", "esprit", "monde", "danser", "vendre", "cuisiner", "entendre",
    "pleuvoir", "respirer", "manger", "fermer", "pere", "nous", "acheter",
    "revenir", "froid", "rester", "sortir", "grandir", "petit",
]


def acute_marked(word: str) -> str:
    for i, ch in enumerate(word):
        if ch in _ACUTE:
            return word[:i] + _ACUTE[ch] + word[i + 1 :]
    raise ValueError(f"no markable vowel in {word!r}")


def ablation_corpus() -> ParallelCorpus:
    """40 pairs: marked/bare source variants with distinct targets."""
    pairs = []
    for i, base in enumerate(ABLATION_BASES):
        pairs.append(
            SentencePair(2 * i, acute_marked(base), ABLATION_TARGETS_MARKED[i])
        )
        pairs.append(SentencePair(2 * i + 1, base, ABLATION_TARGETS_BARE[i]))
    return ParallelCorpus(pairs)


# -- published per-sentence evaluation pairs (hypothesis, reference) -----

SENTENCE_EVAL_PAIRS = [
    ("prends et viens", "prends et viens"),
    ("va viens", "va et viens"),
    ("scorpion", "porte"),
    ("porte", "fuire"),
    ("se masser le remede", "oindre avec un médicament"),
    ("esprit de la vie", "pousser de nouvelles feuilles"),
]
SENTENCE_EVAL_SCORES = [1.0, 1.0, 0.0, 0.0, 0.0, 0.25]


# -- brute-force metric oracles ------------------------------------------


def oracle_ngrams(tokens, n):
    grams = {}
    for i in range(len(tokens) - n + 1):
        key = tuple(tokens[i : i + n])
        grams[key] = grams.get(key, 0) + 1
    return grams


def oracle_clipped(hyp, ref, n):
    hyp_grams = oracle_ngrams(hyp, n)
    ref_grams = oracle_ngrams(ref, n)
    matched = 0
    total = 0
    for gram, count in hyp_grams.items():
        matched += min(count, ref_grams.get(gram, 0))
        total += count
    return matched, total


def oracle_bleu_corpus(hyps, refs, max_n=4):
    """Percent-scale corpus BLEU matching the library's conventions."""
    c = sum(len(h) for h in hyps)
    r = sum(len(t) for t in refs)
    if c == 0:
        return 0.0
    logs = []
    for n in range(1, max_n + 1):
        matched = 0
        total = 0
        for hyp, ref in zip(hyps, refs):
            m, t = oracle_clipped(hyp, ref, n)
            matched += m
            total += t
        if total == 0:
            continue
        if matched == 0:
            return 0.0
        logs.append(math.log(matched / total))
    if not logs:
        return 0.0
    score = math.exp(sum(logs) / len(logs))
    if c < r:
        score *= math.exp(1.0 - r / c)
    return score * 100.0


def oracle_bleu_sentence(hyp, ref):
    matched, total = oracle_clipped(hyp, ref, 1)
    return matched / total


def oracle_gleu(hyps, refs, max_n=4):
    matched = 0
    hyp_total = 0
    ref_total = 0
    for hyp, ref in zip(hyps, refs):
        for n in range(1, max_n + 1):
            m, t = oracle_clipped(hyp, ref, n)
            matched += m
            hyp_total += t
            ref_total += max(len(ref) - n + 1, 0)
    if hyp_total == 0 or ref_total == 0:
        return 0.0
    return min(matched / hyp_total, matched / ref_total) * 100.0


def random_token_pairs(seed, n_pairs, max_len=40, vocab=20):
    """(hyp, ref) token-sequence pairs with lengths in 1..max_len."""
    rng = Rng(seed)
    pairs = []
    for _ in range(n_pairs):
        hyp = [f"w{rng.below(vocab)}" for _ in range(1 + rng.below(max_len))]
        ref = [f"w{rng.below(vocab)}" for _ in range(1 + rng.below(max_len))]
        pairs.append((hyp, ref))
    return pairs
