"""Unicode normalization, diacritic handling, tokenization, vocabularies.

Two encoding modes: ``PRESERVE`` keeps accented word forms as distinct
tokens; ``STRIP`` removes all combining marks after canonical
decomposition. Special base letters (ɔ, ɛ, ...) are never stripped —
only Unicode category Mn marks are.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

from .errors import EmptyCorpusError, EmptyInputError, FormatError, IdRangeError

PAD_ID, SOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3
PAD_TOKEN, SOS_TOKEN, EOS_TOKEN, UNK_TOKEN = "<pad>", "<sos>", "<eos>", "<unk>"
SPECIAL_TOKENS = (PAD_TOKEN, SOS_TOKEN, EOS_TOKEN, UNK_TOKEN)


class DiacriticMode(Enum):
    PRESERVE = "preserve"
    STRIP = "strip"


def normalize(text: str) -> str:
    """Canonical composition (NFC); idempotent."""
    return unicodedata.normalize("NFC", text)


def strip_diacritics(text: str) -> str:
    """Remove combining marks: decompose, drop Mn code points, recompose."""
    decomposed = unicodedata.normalize("NFD", text)
    kept = "".join(ch for ch in decomposed if unicodedata.category(ch) != "Mn")
    return unicodedata.normalize("NFC", kept)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str, mode: DiacriticMode) -> list[str]:
    """Lowercase, normalize, apply the diacritic mode, then split.

    Splitting is on whitespace, with leading/trailing punctuation peeled
    off as single-character tokens. Internal apostrophes and hyphens stay
    inside their token, so French elisions survive ("l'homme").
    """
    if not text or not text.strip():
        raise EmptyInputError("cannot tokenize empty text")
    text = normalize(text.casefold())
    if mode is DiacriticMode.STRIP:
        text = strip_diacritics(text)
    tokens: list[str] = []
    for run in text.split():
        lead: list[str] = []
        while run and _is_punct(run[0]):
            lead.append(run[0])
            run = run[1:]
        trail: list[str] = []
        while run and _is_punct(run[-1]):
            trail.append(run[-1])
            run = run[:-1]
        tokens.extend(lead)
        if run:
            tokens.append(run)
        tokens.extend(reversed(trail))
    return tokens


@dataclass(frozen=True)
class EncodedSentence:
    """Id sequence wrapped in SOS/EOS; never contains PAD."""

    ids: tuple[int, ...]

    def __post_init__(self):
        if len(self.ids) < 2:
            raise ValueError("encoded sentence needs at least SOS and EOS")
        if self.ids[0] != SOS_ID or self.ids[-1] != EOS_ID:
            raise ValueError("encoded sentence must start with SOS and end with EOS")
        if PAD_ID in self.ids:
            raise ValueError("encoded sentence must not contain PAD")

    def __len__(self) -> int:
        return len(self.ids)


class Vocabulary:
    """Deterministic token↔id map with four reserved specials at ids 0..3."""

    def __init__(self, mode: DiacriticMode, content_tokens: Iterable[str]):
        self.mode = mode
        self.tokens: list[str] = list(SPECIAL_TOKENS) + list(content_tokens)
        self.index: dict[str, int] = {}
        for i, tok in enumerate(self.tokens):
            if tok in self.index:
                raise ValueError(f"duplicate token {tok!r}")
            self.index[tok] = i

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Vocabulary)
            and self.mode == other.mode
            and self.tokens == other.tokens
        )

    def id_of(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def serialize(self) -> str:
        """File form: `#mode=` header, then one token per line (line = id)."""
        lines = [f"#mode={self.mode.value}"] + self.tokens
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.serialize(), encoding="utf-8")

    @classmethod
    def parse(cls, text: str) -> "Vocabulary":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#mode="):
            raise FormatError(1, "vocabulary file must start with a #mode= header")
        mode_name = lines[0][len("#mode="):]
        try:
            mode = DiacriticMode(mode_name)
        except ValueError:
            raise FormatError(1, f"unknown mode {mode_name!r}") from None
        tokens = lines[1:]
        if tokens[:4] != list(SPECIAL_TOKENS):
            raise FormatError(2, "first four tokens must be the reserved specials")
        return cls(mode, tokens[4:])

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls.parse(Path(path).read_text(encoding="utf-8"))


def build_vocab(
    sentences: Iterable[str], mode: DiacriticMode, min_count: int = 1
) -> Vocabulary:
    """Frequency-then-lexicographic token inventory over one corpus side."""
    if min_count < 1:
        raise ValueError("min_count must be positive")
    counts: Counter[str] = Counter()
    seen = False
    for sentence in sentences:
        seen = True
        counts.update(tokenize(sentence, mode))
    if not seen:
        raise EmptyCorpusError("cannot build a vocabulary from no sentences")
    kept = [tok for tok, c in counts.items() if c >= min_count]
    kept.sort(key=lambda tok: (-counts[tok], tok))
    return Vocabulary(mode, kept)


def encode(tokens: list[str], vocab: Vocabulary) -> EncodedSentence:
    """Wrap in SOS/EOS; out-of-vocabulary tokens map to UNK."""
    if not tokens:
        raise EmptyInputError("cannot encode an empty token list")
    ids = [SOS_ID] + [vocab.id_of(tok) for tok in tokens] + [EOS_ID]
    return EncodedSentence(tuple(ids))


def decode(ids: EncodedSentence | Iterable[int], vocab: Vocabulary) -> list[str]:
    """Map ids back to tokens, dropping PAD/SOS/EOS."""
    raw = ids.ids if isinstance(ids, EncodedSentence) else ids
    out = []
    for i in raw:
        if not 0 <= i < len(vocab):
            raise IdRangeError(f"id {i} outside vocabulary of size {len(vocab)}")
        if i in (PAD_ID, SOS_ID, EOS_ID):
            continue
        out.append(vocab.tokens[i])
    return out
