"""Mini-batch teacher-forced training and bit-exact checkpointing.

Batches are length-bucketed (shuffle, stable sort by source length,
consecutive slices) and padded to the batch maximum. The math core runs
single-threaded so a seed fully determines the run.
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import GradientTape, backward
from .corpus import ParallelCorpus
from .errors import (
    ConfigFileError,
    ConfigMismatchError,
    CorruptCheckpointError,
    EmptyCorpusError,
    NonFiniteGradientError,
)
from .model import ModelConfig, ModelParameters, forward_loss, init_params
from .rng import Rng
from .tokenizer import PAD_ID, EncodedSentence, Vocabulary, encode, tokenize

CHECKPOINT_MAGIC = b"FFRCKPT1"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    epochs: int
    learning_rate: float = 1e-3
    batch_size: int = 32
    teacher_forcing_ratio: float = 1.0
    grad_clip_norm: float = 5.0
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int | None = None  # early stop on val loss when set

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.teacher_forcing_ratio <= 1.0:
            raise ValueError("teacher_forcing_ratio must be in [0, 1]")


@dataclass
class EpochStats:
    train_loss: float
    val_loss: float
    wall_seconds: float

    def __eq__(self, other):
        # wall time is informational; equality is about the math
        return (
            isinstance(other, EpochStats)
            and self.train_loss == other.train_loss
            and self.val_loss == other.val_loss
        )


@dataclass
class TrainReport:
    epochs: list[EpochStats] = field(default_factory=list)


class Adam:
    """Adam with bias correction and global-norm gradient clipping.

    Clipping rescales every gradient before the moment updates; the step
    zeroes all gradients afterwards.
    """

    def __init__(self, params: ModelParameters, config: TrainConfig):
        self.params = params
        self.config = config
        self.step_count = 0
        self.m = {p.name: np.zeros_like(p.value.data) for p in params.all()}
        self.v = {p.name: np.zeros_like(p.value.data) for p in params.all()}

    def step(self) -> None:
        cfg = self.config
        grads = {}
        sq_norm = 0.0
        for p in self.params.all():
            g = p.gradient
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(f"gradient of {p.name} is not finite")
            grads[p.name] = g
            sq_norm += float((g * g).sum())
        norm = sq_norm ** 0.5
        if cfg.grad_clip_norm > 0 and norm > cfg.grad_clip_norm:
            scale = cfg.grad_clip_norm / norm
            for g in grads.values():
                g *= scale
        self.step_count += 1
        t = self.step_count
        for p in self.params.all():
            g = grads[p.name]
            m = self.m[p.name]
            v = self.v[p.name]
            m *= cfg.beta1
            m += (1 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1 - cfg.beta2) * g * g
            m_hat = m / (1 - cfg.beta1 ** t)
            v_hat = v / (1 - cfg.beta2 ** t)
            p.value.data -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        self.params.zero_grads()


@dataclass
class Checkpoint:
    model_config: ModelConfig
    src_vocab: Vocabulary
    tgt_vocab: Vocabulary
    tensors: dict[str, np.ndarray]  # parameters, then adam.m.* / adam.v.*
    step: int
    version: int = CHECKPOINT_VERSION

    @property
    def mode(self):
        return self.src_vocab.mode

    def to_params(self) -> ModelParameters:
        """Rebuild live parameters from the stored tensors."""
        params = init_params(self.model_config, seed=0)
        for p in params.all():
            stored = self.tensors[p.name]
            if stored.shape != p.value.data.shape:
                raise CorruptCheckpointError(
                    f"tensor {p.name} has shape {stored.shape}, "
                    f"expected {p.value.data.shape}"
                )
            p.value.data[...] = stored
        return params


def _encode_pairs(corpus: ParallelCorpus, src_vocab: Vocabulary,
                  tgt_vocab: Vocabulary) -> list[tuple[EncodedSentence, EncodedSentence]]:
    mode = src_vocab.mode
    out = []
    for pair in corpus.pairs:
        src = encode(tokenize(pair.source, mode), src_vocab)
        tgt = encode(tokenize(pair.target, mode), tgt_vocab)
        out.append((src, tgt))
    return out


def _make_batches(encoded, order: list[int], batch_size: int):
    """Stable sort the shuffled order by source length, slice, pad."""
    order = sorted(order, key=lambda i: len(encoded[i][0]))
    batches = []
    for start in range(0, len(order), batch_size):
        chunk = [encoded[i] for i in order[start : start + batch_size]]
        max_src = max(len(src) for src, _ in chunk)
        max_tgt = max(len(tgt) for _, tgt in chunk)
        padded = [
            (
                list(src.ids) + [PAD_ID] * (max_src - len(src)),
                list(tgt.ids) + [PAD_ID] * (max_tgt - len(tgt)),
            )
            for src, tgt in chunk
        ]
        batches.append(padded)
    return batches


def _positions(batch) -> int:
    """Number of predicted positions in a padded batch."""
    total = 0
    for _, tgt in batch:
        ids = tgt[: tgt.index(PAD_ID)] if PAD_ID in tgt else tgt
        total += len(ids) - 1
    return total


def _corpus_loss(batches, params) -> float:
    total = 0.0
    n = 0
    for batch in batches:
        k = _positions(batch)
        total += forward_loss(batch, params).item() * k
        n += k
    return total / n


def train(
    train_corpus: ParallelCorpus,
    val_corpus: ParallelCorpus,
    vocabs: tuple[Vocabulary, Vocabulary],
    model_config: ModelConfig,
    train_config: TrainConfig,
) -> tuple[Checkpoint, TrainReport]:
    """Run the training loop; returns the final checkpoint and per-epoch losses."""
    src_vocab, tgt_vocab = vocabs
    if src_vocab.mode != tgt_vocab.mode:
        raise ConfigMismatchError(
            f"vocabulary modes differ: {src_vocab.mode.value} vs {tgt_vocab.mode.value}"
        )
    if model_config.src_vocab_size != len(src_vocab):
        raise ConfigMismatchError(
            f"model src_vocab_size {model_config.src_vocab_size} != "
            f"vocabulary size {len(src_vocab)}"
        )
    if model_config.tgt_vocab_size != len(tgt_vocab):
        raise ConfigMismatchError(
            f"model tgt_vocab_size {model_config.tgt_vocab_size} != "
            f"vocabulary size {len(tgt_vocab)}"
        )
    if not train_corpus.pairs or not val_corpus.pairs:
        raise EmptyCorpusError("training and validation corpora must be non-empty")

    master = Rng(train_config.seed)
    init_seed = master.next_u64()
    shuffle_rng = Rng(master.next_u64())
    sampling_rng = Rng(master.next_u64())

    params = init_params(model_config, init_seed)
    optimizer = Adam(params, train_config)
    train_enc = _encode_pairs(train_corpus, src_vocab, tgt_vocab)
    val_enc = _encode_pairs(val_corpus, src_vocab, tgt_vocab)
    val_batches = _make_batches(val_enc, list(range(len(val_enc))),
                                train_config.batch_size)

    report = TrainReport()
    best_val = float("inf")
    epochs_since_best = 0
    for _ in range(train_config.epochs):
        t0 = time.perf_counter()
        order = list(range(len(train_enc)))
        shuffle_rng.shuffle(order)
        batches = _make_batches(train_enc, order, train_config.batch_size)
        loss_sum = 0.0
        n_positions = 0
        for batch in batches:
            with GradientTape():
                loss = forward_loss(
                    batch, params,
                    teacher_forcing_ratio=train_config.teacher_forcing_ratio,
                    sampling_rng=sampling_rng,
                )
            backward(loss)
            optimizer.step()
            k = _positions(batch)
            loss_sum += loss.item() * k
            n_positions += k
        val_loss = _corpus_loss(val_batches, params)
        report.epochs.append(
            EpochStats(
                train_loss=loss_sum / n_positions,
                val_loss=val_loss,
                wall_seconds=time.perf_counter() - t0,
            )
        )
        if train_config.patience is not None:
            if val_loss < best_val:
                best_val = val_loss
                epochs_since_best = 0
            else:
                epochs_since_best += 1
                if epochs_since_best >= train_config.patience:
                    break

    tensors = {p.name: p.value.data.copy() for p in params.all()}
    for p in params.all():
        tensors[f"adam.m.{p.name}"] = optimizer.m[p.name].copy()
    for p in params.all():
        tensors[f"adam.v.{p.name}"] = optimizer.v[p.name].copy()
    checkpoint = Checkpoint(
        model_config=model_config,
        src_vocab=src_vocab,
        tgt_vocab=tgt_vocab,
        tensors=tensors,
        step=optimizer.step_count,
    )
    return checkpoint, report


# -- checkpoint serialization --------------------------------------------
#
# Layout, all little-endian:
#   magic "FFRCKPT1" | u32 version | u32 metadata length | metadata JSON
#   | u32 tensor count | per tensor: u16 name length, name, u8 rank,
#   u32 dims..., f32 row-major data | u64 FNV-1a checksum of everything
#   before it.

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def _vocab_hash(vocab: Vocabulary) -> str:
    import hashlib

    return hashlib.sha256(vocab.serialize().encode("utf-8")).hexdigest()


def _metadata(ckpt: Checkpoint) -> bytes:
    meta = {
        "model_config": ckpt.model_config.to_json_dict(),
        "mode": ckpt.mode.value,
        "src_vocab_hash": _vocab_hash(ckpt.src_vocab),
        "tgt_vocab_hash": _vocab_hash(ckpt.tgt_vocab),
        "src_vocab_tokens": ckpt.src_vocab.tokens[4:],
        "tgt_vocab_tokens": ckpt.tgt_vocab.tokens[4:],
        "step": ckpt.step,
    }
    return json.dumps(meta, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False).encode("utf-8")


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", ckpt.version)]
    meta = _metadata(ckpt)
    parts.append(struct.pack("<I", len(meta)))
    parts.append(meta)
    parts.append(struct.pack("<I", len(ckpt.tensors)))
    for name, arr in ckpt.tensors.items():
        name_b = name.encode("utf-8")
        parts.append(struct.pack("<H", len(name_b)))
        parts.append(name_b)
        parts.append(struct.pack("<B", arr.ndim))
        for dim in arr.shape:
            parts.append(struct.pack("<I", dim))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    body = b"".join(parts)
    Path(path).write_bytes(body + struct.pack("<Q", fnv1a(body)))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptCheckpointError("truncated checkpoint file")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_checkpoint(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if len(raw) < len(CHECKPOINT_MAGIC) + 8:
        raise CorruptCheckpointError("file too short to be a checkpoint")
    body, stored_sum = raw[:-8], struct.unpack("<Q", raw[-8:])[0]
    if fnv1a(body) != stored_sum:
        raise CorruptCheckpointError("checksum mismatch")
    r = _Reader(body)
    if r.take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise CorruptCheckpointError("bad magic bytes")
    version = r.u32()
    if version > CHECKPOINT_VERSION:
        raise CorruptCheckpointError(
            f"format version {version} is newer than supported {CHECKPOINT_VERSION}"
        )
    meta_len = r.u32()
    try:
        meta = json.loads(r.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"bad metadata: {exc}") from exc
    try:
        model_config = ModelConfig.from_json_dict(meta["model_config"])
        mode_value = meta["mode"]
        src_tokens = meta["src_vocab_tokens"]
        tgt_tokens = meta["tgt_vocab_tokens"]
        step = meta["step"]
    except (KeyError, TypeError) as exc:
        raise CorruptCheckpointError(f"incomplete metadata: {exc}") from exc
    from .tokenizer import DiacriticMode

    try:
        mode = DiacriticMode(mode_value)
    except ValueError as exc:
        raise CorruptCheckpointError(f"unknown mode {mode_value!r}") from exc
    src_vocab = Vocabulary(mode, src_tokens)
    tgt_vocab = Vocabulary(mode, tgt_tokens)
    if _vocab_hash(src_vocab) != meta.get("src_vocab_hash"):
        raise CorruptCheckpointError("source vocabulary hash mismatch")
    if _vocab_hash(tgt_vocab) != meta.get("tgt_vocab_hash"):
        raise CorruptCheckpointError("target vocabulary hash mismatch")

    tensors: dict[str, np.ndarray] = {}
    count = r.u32()
    for _ in range(count):
        name = r.take(r.u16()).decode("utf-8")
        rank = r.u8()
        shape = tuple(r.u32() for _ in range(rank))
        n_values = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(r.take(4 * n_values), dtype="<f4")
        tensors[name] = data.astype(np.float64).reshape(shape)
    if r.pos != len(body):
        raise CorruptCheckpointError("trailing bytes after tensor section")
    return Checkpoint(
        model_config=model_config,
        src_vocab=src_vocab,
        tgt_vocab=tgt_vocab,
        tensors=tensors,
        step=step,
        version=version,
    )


# -- train config files ---------------------------------------------------

_CONFIG_KEYS = {
    "train_corpus": str,
    "val_corpus": str,
    "diacritics": str,
    "min_count": int,
    "emb_dim": int,
    "hidden_dim": int,
    "attn_dim": int,
    "max_decode_len": int,
    "learning_rate": float,
    "batch_size": int,
    "epochs": int,
    "teacher_forcing_ratio": float,
    "grad_clip_norm": float,
    "seed": int,
    "patience": int,
}

_REQUIRED_KEYS = ("train_corpus", "val_corpus", "epochs")


def parse_train_config_file(path: str | Path) -> dict:
    """Flat `key = value` file; unknown keys are errors, `#` starts a comment."""
    values: dict[str, object] = {}
    for line_no, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigFileError(f"line {line_no}: expected `key = value`")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigFileError(f"line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigFileError(f"line {line_no}: duplicate key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](value)
        except ValueError:
            raise ConfigFileError(
                f"line {line_no}: bad value {value!r} for {key!r}"
            ) from None
    for key in _REQUIRED_KEYS:
        if key not in values:
            raise ConfigFileError(f"missing required key {key!r}")
    return values
