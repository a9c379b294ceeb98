"""GRU encoder-decoder with additive attention and greedy decoding.

Wiring: the encoder runs left-to-right from a zero state over embedded
source ids. The decoder also starts from a zero state; at each step an
additive attention over the encoder states produces a context vector,
the previous target embedding concatenated with that context feeds the
decoder GRU, and logits come from the new state through the output
projection. Alignment scores live in a small dedicated dimension
(default 30).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import IdRangeError
from .rng import Rng
from .tokenizer import EOS_ID, PAD_ID, SOS_ID, EncodedSentence

INIT_RANGE = 0.08  # weights ~ Uniform(-0.08, 0.08)


@dataclass
class ModelConfig:
    src_vocab_size: int
    tgt_vocab_size: int
    emb_dim: int = 512
    hidden_dim: int = 128
    attn_dim: int = 30
    max_decode_len: int = 112  # longest observed target (111 words) plus EOS

    def __post_init__(self):
        dims = (
            self.src_vocab_size,
            self.tgt_vocab_size,
            self.emb_dim,
            self.hidden_dim,
            self.attn_dim,
        )
        if min(dims) < 1:
            raise ValueError("all dimensions must be >= 1")
        if self.max_decode_len < 2:
            raise ValueError("max_decode_len must be >= 2")

    def to_json_dict(self) -> dict:
        return {
            "src_vocab_size": self.src_vocab_size,
            "tgt_vocab_size": self.tgt_vocab_size,
            "emb_dim": self.emb_dim,
            "hidden_dim": self.hidden_dim,
            "attn_dim": self.attn_dim,
            "max_decode_len": self.max_decode_len,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class GruWeights:
    """One GRU cell: update gate z, reset gate r, candidate h~."""

    W_z: Parameter
    U_z: Parameter
    b_z: Parameter
    W_r: Parameter
    U_r: Parameter
    b_r: Parameter
    W_h: Parameter
    U_h: Parameter
    b_h: Parameter

    def all(self) -> list[Parameter]:
        return [self.W_z, self.U_z, self.b_z, self.W_r, self.U_r, self.b_r,
                self.W_h, self.U_h, self.b_h]


class ModelParameters:
    """Every weight of the model, addressable by unique name."""

    def __init__(self, config: ModelConfig, src_embedding: Parameter,
                 tgt_embedding: Parameter, encoder: GruWeights,
                 decoder: GruWeights, W_a: Parameter, U_a: Parameter,
                 v_a: Parameter, W_o: Parameter, b_o: Parameter):
        self.config = config
        self.src_embedding = src_embedding
        self.tgt_embedding = tgt_embedding
        self.encoder = encoder
        self.decoder = decoder
        self.W_a = W_a
        self.U_a = U_a
        self.v_a = v_a
        self.W_o = W_o
        self.b_o = b_o
        self._by_name: dict[str, Parameter] = {}
        for p in self.all():
            if p.name in self._by_name:
                raise ValueError(f"duplicate parameter name {p.name!r}")
            self._by_name[p.name] = p

    def all(self) -> list[Parameter]:
        return (
            [self.src_embedding, self.tgt_embedding]
            + self.encoder.all()
            + self.decoder.all()
            + [self.W_a, self.U_a, self.v_a, self.W_o, self.b_o]
        )

    def by_name(self, name: str) -> Parameter:
        return self._by_name[name]

    def zero_grads(self) -> None:
        for p in self.all():
            p.zero_grad()


@dataclass
class EncoderOutput:
    states: Tensor        # [src_len x hidden], one row per input position
    final: Tensor         # last unmasked state
    mask: list[bool]      # False at padded source positions


def _uniform_array(rng: Rng, shape: tuple[int, ...]) -> np.ndarray:
    n = int(np.prod(shape))
    flat = np.array([rng.uniform(-INIT_RANGE, INIT_RANGE) for _ in range(n)])
    return flat.reshape(shape)


def _init_gru(rng: Rng, prefix: str, in_dim: int, hidden: int) -> GruWeights:
    def w(name, shape):
        return Parameter(f"{prefix}.{name}", _uniform_array(rng, shape))

    def b(name):
        return Parameter(f"{prefix}.{name}", np.zeros(hidden))

    return GruWeights(
        W_z=w("W_z", (in_dim, hidden)), U_z=w("U_z", (hidden, hidden)), b_z=b("b_z"),
        W_r=w("W_r", (in_dim, hidden)), U_r=w("U_r", (hidden, hidden)), b_r=b("b_r"),
        W_h=w("W_h", (in_dim, hidden)), U_h=w("U_h", (hidden, hidden)), b_h=b("b_h"),
    )


def init_params(config: ModelConfig, seed: int) -> ModelParameters:
    """Seeded init: weights uniform in ±0.08 drawn in a fixed order, biases zero."""
    rng = Rng(seed)
    e = config.emb_dim
    h = config.hidden_dim
    a = config.attn_dim
    src_emb = Parameter("emb.src", _uniform_array(rng, (config.src_vocab_size, e)))
    tgt_emb = Parameter("emb.tgt", _uniform_array(rng, (config.tgt_vocab_size, e)))
    encoder = _init_gru(rng, "enc", e, h)
    decoder = _init_gru(rng, "dec", e + h, h)
    W_a = Parameter("attn.W_a", _uniform_array(rng, (h, a)))
    U_a = Parameter("attn.U_a", _uniform_array(rng, (h, a)))
    v_a = Parameter("attn.v_a", _uniform_array(rng, (a,)))
    W_o = Parameter("out.W_o", _uniform_array(rng, (h, config.tgt_vocab_size)))
    b_o = Parameter("out.b_o", np.zeros(config.tgt_vocab_size))
    return ModelParameters(config, src_emb, tgt_emb, encoder, decoder,
                           W_a, U_a, v_a, W_o, b_o)


def gru_cell(x: Tensor, h_prev: Tensor, w: GruWeights) -> Tensor:
    """z=σ(Wx+Uh+b); r likewise; h~=tanh(W_h x+U_h(r⊙h)+b_h); h'=(1-z)⊙h+z⊙h~."""
    z = ad.sigmoid(ad.add(ad.add(ad.matmul(x, w.W_z.value),
                                 ad.matmul(h_prev, w.U_z.value)), w.b_z.value))
    r = ad.sigmoid(ad.add(ad.add(ad.matmul(x, w.W_r.value),
                                 ad.matmul(h_prev, w.U_r.value)), w.b_r.value))
    h_tilde = ad.tanh(ad.add(ad.add(ad.matmul(x, w.W_h.value),
                                    ad.matmul(ad.mul(r, h_prev), w.U_h.value)),
                             w.b_h.value))
    return ad.add(ad.mul(ad.affine(z, -1.0, 1.0), h_prev), ad.mul(z, h_tilde))


def encode_sequence(ids: EncodedSentence | list[int],
                    params: ModelParameters) -> EncoderOutput:
    """Embed ids and run the encoder GRU from a zero state.

    Accepts a padded raw id list too; PAD positions are computed but
    masked out of attention, and `final` is the last unmasked state.
    """
    raw = list(ids.ids) if isinstance(ids, EncodedSentence) else list(ids)
    vocab = params.config.src_vocab_size
    for i in raw:
        if not 0 <= i < vocab:
            raise IdRangeError(f"source id {i} outside vocabulary of size {vocab}")
    mask = [i != PAD_ID for i in raw]
    h = Tensor(np.zeros(params.config.hidden_dim))
    states: list[Tensor] = []
    final = h
    for pos, token_id in enumerate(raw):
        x = ad.take_row(params.src_embedding.value, token_id)
        h = gru_cell(x, h, params.encoder)
        states.append(h)
        if mask[pos]:
            final = h
    return EncoderOutput(states=ad.stack_rows(states), final=final, mask=mask)


def attention(s_prev: Tensor, enc: EncoderOutput,
              params: ModelParameters) -> tuple[Tensor, Tensor]:
    """Additive attention: scores v_a . tanh(W_a^T s_prev + U_a^T state_i).

    Returns (context, weights); weights are a distribution over source
    positions, exactly zero on masked ones.
    """
    proj = ad.matmul(enc.states, params.U_a.value)          # [S x A]
    query = ad.matmul(s_prev, params.W_a.value)             # [A]
    scores = ad.matmul(ad.tanh(ad.add_rowvec(proj, query)), params.v_a.value)
    weights = ad.masked_softmax(scores, enc.mask)
    context = ad.matmul(weights, enc.states)                # [H]
    return context, weights


def decode_step(y_prev_id: int, s_prev: Tensor, enc: EncoderOutput,
                params: ModelParameters) -> tuple[Tensor, Tensor, Tensor]:
    """One decoder step: attend, concat embedding+context, GRU, project."""
    vocab = params.config.tgt_vocab_size
    if not 0 <= y_prev_id < vocab:
        raise IdRangeError(f"target id {y_prev_id} outside vocabulary of size {vocab}")
    context, weights = attention(s_prev, enc, params)
    x = ad.concat([ad.take_row(params.tgt_embedding.value, y_prev_id), context])
    s_next = gru_cell(x, s_prev, params.decoder)
    logits = ad.add(ad.matmul(s_next, params.W_o.value), params.b_o.value)
    return logits, s_next, weights


def _effective_ids(tgt: EncodedSentence | list[int]) -> list[int]:
    """Target ids up to (and excluding) any padding."""
    raw = list(tgt.ids) if isinstance(tgt, EncodedSentence) else list(tgt)
    if PAD_ID in raw:
        raw = raw[: raw.index(PAD_ID)]
    return raw


def forward_loss(
    batch: list[tuple[EncodedSentence | list[int], EncodedSentence | list[int]]],
    params: ModelParameters,
    teacher_forcing_ratio: float = 1.0,
    sampling_rng: Rng | None = None,
) -> Tensor:
    """Teacher-forced loss: mean cross-entropy over every target position.

    At step t the decoder input is the gold token t-1; with a ratio
    below 1 and an rng supplied, some steps feed the model's own argmax
    instead (scheduled sampling). PAD positions are excluded.
    """
    if not batch:
        raise ValueError("forward_loss needs a non-empty batch")
    all_logits: list[Tensor] = []
    targets: list[int] = []
    for src, tgt in batch:
        enc = encode_sequence(src, params)
        s = Tensor(np.zeros(params.config.hidden_dim))
        tgt_ids = _effective_ids(tgt)
        y_in = tgt_ids[0]
        for t in range(1, len(tgt_ids)):
            logits, s, _ = decode_step(y_in, s, enc, params)
            all_logits.append(logits)
            targets.append(tgt_ids[t])
            use_gold = (
                teacher_forcing_ratio >= 1.0
                or sampling_rng is None
                or sampling_rng.uniform() < teacher_forcing_ratio
            )
            y_in = tgt_ids[t] if use_gold else int(np.argmax(logits.data))
    pooled = ad.stack_rows(all_logits)
    return ad.cross_entropy(pooled, targets, [False] * len(targets))


def greedy_decode(src: EncodedSentence | list[int], params: ModelParameters,
                  max_len: int | None = None) -> list[int]:
    """Argmax decoding from SOS and a zero state; ties break to the lowest id.

    Stops at EOS or after max_len steps; the returned ids contain no
    specials.
    """
    if max_len is None:
        max_len = params.config.max_decode_len
    enc = encode_sequence(src, params)
    s = Tensor(np.zeros(params.config.hidden_dim))
    y = SOS_ID
    out: list[int] = []
    for _ in range(max_len):
        logits, s, _ = decode_step(y, s, enc, params)
        y = int(np.argmax(logits.data))  # first occurrence = lowest id
        if y == EOS_ID:
            break
        if y not in (PAD_ID, SOS_ID):
            out.append(y)
    return out
