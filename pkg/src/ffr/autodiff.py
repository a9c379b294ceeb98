"""Reverse-mode gradient engine over dense row-major tensors.

Tensors wrap float64 numpy arrays. While a :class:`GradientTape` is
active, each operation appends a record (output, inputs, backward
closure) to the tape; execution order is already topological, so
:func:`backward` just walks the records in reverse. Parameters carry a
persistent gradient buffer into which backward accumulates; an explicit
zero step resets them.

No broadcasting except scalar-tensor; other shape mismatches raise
ShapeError rather than silently coercing.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    AllMaskedError,
    IdRangeError,
    NotRecordedError,
    ShapeError,
)
from .rng import Rng

LOG_FLOOR = 1e-12  # input floor for log inside cross_entropy


class Tensor:
    """Shape-annotated real-valued array; the unit of model math."""

    __slots__ = ("data", "grad", "tape")

    def __init__(self, data, tape=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None  # persistent buffer; allocated for parameters only
        self.tape = tape

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


class Parameter:
    """Named trainable tensor with an identically shaped gradient buffer."""

    __slots__ = ("name", "value")

    def __init__(self, name: str, data):
        self.name = name
        self.value = Tensor(data)
        self.value.grad = np.zeros_like(self.value.data)

    @property
    def gradient(self) -> np.ndarray:
        return self.value.grad

    def zero_grad(self) -> None:
        self.value.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.data.shape})"


class GradientTape:
    """Ordered record of executed operations; use as a context manager."""

    def __init__(self):
        self._records: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def __enter__(self) -> "GradientTape":
        global _ACTIVE
        if _ACTIVE is not None:
            raise RuntimeError("a GradientTape is already recording")
        _ACTIVE = self
        return self

    def __exit__(self, *exc_info):
        global _ACTIVE
        _ACTIVE = None
        return False

    def __len__(self) -> int:
        return len(self._records)


_ACTIVE: GradientTape | None = None


def _emit(out: Tensor, inputs: tuple[Tensor, ...], bwd) -> Tensor:
    if _ACTIVE is not None:
        out.tape = _ACTIVE
        _ACTIVE._records.append((out, inputs, bwd))
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(param) into every parameter's gradient buffer.

    Repeated calls without zeroing add up; training zeroes after each
    optimizer step.
    """
    tape = loss.tape
    if tape is None:
        raise NotRecordedError("loss was not produced while a tape was recording")
    if loss.data.shape != ():
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones(())}
    for out, inputs, bwd in reversed(tape._records):
        g = grads.pop(id(out), None)
        if g is None:
            continue  # this value never reached the loss
        for tensor, ig in zip(inputs, bwd(g)):
            if ig is None:
                continue
            if tensor.grad is not None:
                tensor.grad += ig
            elif tensor.tape is tape:
                prev = grads.get(id(tensor))
                grads[id(tensor)] = ig if prev is None else prev + ig


# -- operations -----------------------------------------------------------


def _binary_shapes(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape == b.data.shape:
        return
    if a.data.shape == () or b.data.shape == ():
        return  # scalar-tensor is the one permitted broadcast
    raise ShapeError(f"{op}: incompatible shapes {a.data.shape} and {b.data.shape}")


def _reduce_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    return g.sum() if shape == () and g.shape != () else g


def add(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "add")
    out = Tensor(a.data + b.data)

    def bwd(g):
        return _reduce_to(g, a.data.shape), _reduce_to(g, b.data.shape)

    return _emit(out, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "sub")
    out = Tensor(a.data - b.data)

    def bwd(g):
        return _reduce_to(g, a.data.shape), _reduce_to(-g, b.data.shape)

    return _emit(out, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "mul")
    out = Tensor(a.data * b.data)

    def bwd(g):
        return _reduce_to(g * b.data, a.data.shape), _reduce_to(g * a.data, b.data.shape)

    return _emit(out, (a, b), bwd)


def affine(x: Tensor, scale: float, shift: float = 0.0) -> Tensor:
    """scale * x + shift with constant coefficients (e.g. 1 - z)."""
    out = Tensor(scale * x.data + shift)

    def bwd(g):
        return (scale * g,)

    return _emit(out, (x,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; also vector-matrix and matrix-vector."""
    ad, bd = a.data, b.data
    if ad.ndim not in (1, 2) or bd.ndim not in (1, 2):
        raise ShapeError(f"matmul: ranks {ad.ndim} and {bd.ndim} unsupported")
    if ad.shape[-1] != bd.shape[0]:
        raise ShapeError(f"matmul: inner dims {ad.shape} x {bd.shape} do not match")
    out = Tensor(ad @ bd)

    def bwd(g):
        if ad.ndim == 2 and bd.ndim == 2:
            return g @ bd.T, ad.T @ g
        if ad.ndim == 1 and bd.ndim == 2:
            return bd @ g, np.outer(ad, g)
        if ad.ndim == 2 and bd.ndim == 1:
            return np.outer(g, bd), ad.T @ g
        return g * bd, g * ad  # 1-D dot

    return _emit(out, (a, b), bwd)


def sigmoid(x: Tensor) -> Tensor:
    xd = x.data
    out_data = np.empty_like(xd)
    pos = xd >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-xd[pos]))
    ex = np.exp(xd[~pos])
    out_data[~pos] = ex / (1.0 + ex)
    out = Tensor(out_data)

    def bwd(g):
        return (g * out_data * (1.0 - out_data),)

    return _emit(out, (x,), bwd)


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)
    out = Tensor(out_data)

    def bwd(g):
        return (g * (1.0 - out_data * out_data),)

    return _emit(out, (x,), bwd)


def concat(parts: list[Tensor]) -> Tensor:
    """Concatenate along the last axis; all other axes must agree."""
    if not parts:
        raise ShapeError("concat of nothing")
    lead = parts[0].data.shape[:-1]
    for p in parts[1:]:
        if p.data.shape[:-1] != lead:
            raise ShapeError("concat: leading axes differ")
    out = Tensor(np.concatenate([p.data for p in parts], axis=-1))
    sizes = [p.data.shape[-1] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=-1))

    return _emit(out, tuple(parts), bwd)


def add_rowvec(m: Tensor, v: Tensor) -> Tensor:
    """Add a vector to every row of a matrix (explicit, not broadcasting)."""
    if m.data.ndim != 2 or v.data.ndim != 1 or m.data.shape[1] != v.data.shape[0]:
        raise ShapeError(f"add_rowvec: shapes {m.data.shape} and {v.data.shape}")
    out = Tensor(m.data + v.data)

    def bwd(g):
        return g, g.sum(axis=0)

    return _emit(out, (m, v), bwd)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Exp-normalize along one axis with max subtraction for stability."""
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(out_data)

    def bwd(g):
        inner = (g * out_data).sum(axis=axis, keepdims=True)
        return (out_data * (g - inner),)

    return _emit(out, (x,), bwd)


def masked_softmax(x: Tensor, mask: list[bool]) -> Tensor:
    """Softmax over the unmasked entries of a vector; masked get exactly 0."""
    if x.data.ndim != 1 or len(mask) != x.data.shape[0]:
        raise ShapeError(f"masked_softmax: shape {x.data.shape} vs mask {len(mask)}")
    keep = np.asarray(mask, dtype=bool)
    if not keep.any():
        raise AllMaskedError("every position is masked")
    shifted = x.data - x.data[keep].max()
    e = np.where(keep, np.exp(np.where(keep, shifted, 0.0)), 0.0)
    out_data = e / e.sum()
    out = Tensor(out_data)

    def bwd(g):
        inner = float((g * out_data).sum())
        return (out_data * (g - inner),)

    return _emit(out, (x,), bwd)


def take_row(m: Tensor, i: int) -> Tensor:
    """Row i of a matrix (embedding lookup)."""
    if m.data.ndim != 2:
        raise ShapeError("take_row needs a matrix")
    if not 0 <= i < m.data.shape[0]:
        raise IdRangeError(f"row {i} outside matrix with {m.data.shape[0]} rows")
    out = Tensor(m.data[i].copy())

    def bwd(g):
        ig = np.zeros_like(m.data)
        ig[i] = g
        return (ig,)

    return _emit(out, (m,), bwd)


def stack_rows(rows: list[Tensor]) -> Tensor:
    """Stack equal-length vectors into a matrix."""
    if not rows:
        raise ShapeError("stack_rows of nothing")
    width = rows[0].data.shape
    if any(r.data.shape != width for r in rows):
        raise ShapeError("stack_rows: row lengths differ")
    out = Tensor(np.stack([r.data for r in rows]))

    def bwd(g):
        return tuple(g[i] for i in range(len(rows)))

    return _emit(out, tuple(rows), bwd)


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(x.data.sum())

    def bwd(g):
        return (np.full_like(x.data, float(g)),)

    return _emit(out, (x,), bwd)


def cross_entropy(logits: Tensor, targets: list[int], pad_mask: list[bool]) -> Tensor:
    """Mean of -log softmax(logits)[target] over unmasked positions.

    ``pad_mask[t]`` True marks position t as padding: it contributes
    nothing and is excluded from the mean. The log argument is floored at
    ``LOG_FLOOR`` so saturated rows cannot produce -inf.
    """
    ld = logits.data
    if ld.ndim != 2:
        raise ShapeError(f"cross_entropy needs T x V logits, got {ld.shape}")
    n_rows, vocab = ld.shape
    if len(targets) != n_rows or len(pad_mask) != n_rows:
        raise ShapeError("targets/pad_mask length must equal the logits row count")
    for t in targets:
        if not 0 <= t < vocab:
            raise IdRangeError(f"target id {t} outside vocabulary of size {vocab}")
    keep = ~np.asarray(pad_mask, dtype=bool)
    n_keep = int(keep.sum())
    if n_keep == 0:
        raise AllMaskedError("all positions are padding")
    shifted = ld - ld.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=1, keepdims=True)
    idx = np.arange(n_rows)
    tgt = np.asarray(targets)
    picked = np.maximum(probs[idx, tgt], LOG_FLOOR)
    losses = -np.log(picked)
    out = Tensor(losses[keep].sum() / n_keep)

    def bwd(g):
        scale = float(g) / n_keep
        glogits = probs * scale
        glogits[idx, tgt] -= scale
        glogits[~keep] = 0.0
        return (glogits,)

    return _emit(out, (logits,), bwd)


# -- verification ---------------------------------------------------------


def check_gradients(
    loss_fn,
    params: list[Parameter],
    eps: float = 1e-5,
    max_entries_per_param: int = 64,
    seed: int = 0,
) -> float:
    """Worst disagreement between backward and central finite differences.

    Runs ``loss_fn`` once under a fresh tape for analytic gradients, then
    perturbs a sampled subset of entries per parameter (all entries for
    small tensors). Per entry the error is relative when either gradient
    is appreciable, absolute otherwise.
    """
    for p in params:
        p.zero_grad()
    with GradientTape():
        loss = loss_fn()
    backward(loss)
    analytic = {p.name: p.gradient.copy() for p in params}

    rng = Rng(seed)
    worst = 0.0
    for p in params:
        flat = p.value.data.reshape(-1)
        n = flat.size
        if n <= max_entries_per_param:
            indices = list(range(n))
        else:
            indices = list(range(n))
            rng.shuffle(indices)
            indices = sorted(indices[:max_entries_per_param])
        a_flat = analytic[p.name].reshape(-1)
        for i in indices:
            original = flat[i]
            flat[i] = original + eps
            f_plus = loss_fn().item()
            flat[i] = original - eps
            f_minus = loss_fn().item()
            flat[i] = original
            fd = (f_plus - f_minus) / (2.0 * eps)
            a = a_flat[i]
            denom = max(abs(a), abs(fd))
            err = abs(a - fd) if denom < 1e-6 else abs(a - fd) / denom
            worst = max(worst, err)
    return worst
