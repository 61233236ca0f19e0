"""Dense tensors with tape-based reverse-mode autodiff and an Adam optimizer.

Ops only record onto a tape while one is active (``with GradTape():``), so
inference code pays nothing for gradient bookkeeping. Every op takes and
returns :class:`Tensor`; the underlying storage is a numpy array whose dtype
is preserved (float32 for training, float64 for gradient checks).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

_NEG_INF = -1e9
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class ShapeError(ValueError):
    pass


class TapeError(RuntimeError):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


@dataclass
class _Node:
    out: Tensor
    inputs: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class GradTape:
    """Ordered record of executed ops.

    Use as a context manager; ops executed inside are recorded in execution
    order and :func:`backward` replays them in reverse, once each.
    """

    _active: GradTape | None = None

    def __init__(self):
        self.nodes: list[_Node] = []
        self._owner: dict[int, int] = {}
        self._prev: GradTape | None = None
        self.consumed = False

    def __enter__(self) -> GradTape:
        self._prev = GradTape._active
        GradTape._active = self
        return self

    def __exit__(self, *exc) -> None:
        GradTape._active = self._prev

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], fn) -> None:
        self._owner[id(out)] = len(self.nodes)
        self.nodes.append(_Node(out, inputs, fn))

    def owns(self, t: Tensor) -> bool:
        return id(t) in self._owner

    def backward(self, loss: Tensor) -> None:
        if self.consumed:
            raise TapeError("tape already consumed")
        if loss.data.size != 1:
            raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not self.owns(loss):
            raise TapeError("loss was not produced under this tape")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes[: self._owner[id(loss)] + 1]):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            for inp, gi in zip(node.inputs, node.backward(g)):
                if gi is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi
                if not self.owns(inp):
                    # leaf: accumulate into .grad
                    gl = grads.pop(key)
                    inp.grad = gl.astype(inp.dtype, copy=False) if inp.grad is None else inp.grad + gl
        self.nodes.clear()
        self._owner.clear()
        self.consumed = True


def backward(loss: Tensor, tape: GradTape | None = None) -> None:
    """Populate ``.grad`` on every leaf that requires grad and fed ``loss``."""
    tape = tape or GradTape._active
    if tape is None:
        raise TapeError("no active tape")
    tape.backward(loss)


# --------------------------------------------------------------------------
# op plumbing


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _emit(out_data: np.ndarray, inputs: tuple[Tensor, ...], fn) -> Tensor:
    tape = GradTape._active
    needs = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs)
    if needs:
        tape.record(out, inputs, fn)
    return out


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.isfinite(arr).all():
        raise FloatingPointError(f"non-finite values produced by {op}")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _coerce_pair(a, b) -> tuple[Tensor, Tensor]:
    # python scalars adopt the tensor's dtype so float32 graphs stay float32
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype))
    elif isinstance(b, Tensor) and not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=b.dtype))
    return a, b


# --------------------------------------------------------------------------
# elementwise


def add(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    sa, sb = a.shape, b.shape
    return _emit(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    sa, sb = a.shape, b.shape
    return _emit(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    ad, bd = a.data, b.data
    return _emit(
        ad * bd,
        (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
    )


def gelu(x: Tensor) -> Tensor:
    """tanh-approximated GELU."""
    xd = x.data
    x2 = xd * xd
    th = np.tanh(_SQRT_2_OVER_PI * xd * (1.0 + 0.044715 * x2))
    out = 0.5 * xd * (1.0 + th)

    def fn(g):
        dinner = _SQRT_2_OVER_PI * (1.0 + 3 * 0.044715 * x2)
        return (g * (0.5 * (1.0 + th) + 0.5 * xd * (1.0 - th * th) * dinner),)

    return _emit(out, (x,), fn)


# --------------------------------------------------------------------------
# shape ops


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    src = x.shape
    return _emit(x.data.reshape(shape), (x,), lambda g: (g.reshape(src),))


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    inv = tuple(np.argsort(axes))
    return _emit(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),))


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row gather ``table[ids]``; gradient scatters back with np.add.at."""
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError("embedding id out of range")

    def fn(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return (gt,)

    return _emit(table.data[ids], (table,), fn)


# --------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy batching rules.

    A 2-D right operand is treated as a shared weight: its gradient is
    accumulated over every leading batch dimension of ``a``.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dims disagree: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    out = ad @ bd

    def fn(g):
        if bd.ndim == 2:
            ga = g @ bd.T if a.requires_grad else None
            gb = None
            if b.requires_grad:
                gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            return ga, gb
        ga = _unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape) if a.requires_grad else None
        gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape) if b.requires_grad else None
        return ga, gb

    return _emit(out, (a, b), fn)


# --------------------------------------------------------------------------
# normalisation and probability


def _softmax_np(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax(x: Tensor, allowed: np.ndarray | None = None, axis: int = -1) -> Tensor:
    """Max-shifted softmax; entries where ``allowed`` is False get zero mass."""
    xd = x.data
    if allowed is not None:
        xd = np.where(allowed, xd, _NEG_INF)
    p = _softmax_np(xd, axis)

    def fn(g):
        return (p * (g - (g * p).sum(axis=axis, keepdims=True)),)

    return _emit(p, (x,), fn)


def softmax_rows(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise ShapeError(f"softmax_rows expects a matrix, got {x.shape}")
    return softmax(x, axis=-1)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    out = xhat * gain.data + bias.data

    def fn(g):
        gg = _unbroadcast(g * xhat, gain.shape)
        gb = _unbroadcast(g, bias.shape)
        gx = g * gain.data
        n = xd.shape[-1]
        gx = rstd / n * (n * gx - gx.sum(-1, keepdims=True) - xhat * (gx * xhat).sum(-1, keepdims=True))
        return gx, gg, gb

    return _emit(out, (x, gain, bias), fn)


def cross_entropy(
    logits: Tensor, targets: np.ndarray, ignore_mask: np.ndarray | None = None
) -> tuple[Tensor, np.ndarray]:
    """Per-position ``-log softmax(logits)[target]`` over the last axis.

    Returns ``(per_position, total)`` where ``per_position`` is a Tensor of
    the leading shape (ignored positions hold exactly 0) and ``total`` is the
    float64 sum over non-ignored positions, for logging. No averaging here;
    callers pick their own normalisation by reducing ``per_position``.
    """
    targets = np.asarray(targets)
    V = logits.shape[-1]
    if targets.shape != logits.shape[:-1]:
        raise ShapeError(f"targets {targets.shape} do not match logits {logits.shape}")
    keep = np.ones(targets.shape, bool) if ignore_mask is None else ~np.asarray(ignore_mask, bool)
    live = targets[keep]
    if live.size and (live.min() < 0 or live.max() >= V):
        raise IndexError("target id out of range")
    safe_t = np.where(keep, targets, 0)
    z = logits.data.astype(np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1))
    picked = np.take_along_axis(z, safe_t[..., None], axis=-1)[..., 0]
    per = np.where(keep, lse - picked, 0.0)
    total = float(per.sum())

    def fn(g):
        p = np.exp(z - lse[..., None])
        np.put_along_axis(p, safe_t[..., None], np.take_along_axis(p, safe_t[..., None], -1) - 1.0, -1)
        p *= (g * keep)[..., None]
        return (p.astype(logits.dtype, copy=False),)

    return _emit(per.astype(logits.dtype), (logits,), fn), total


# --------------------------------------------------------------------------
# reductions


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    total = x.data.sum(dtype=np.float64).astype(x.dtype)
    return _emit(np.asarray(total), (x,), lambda g: (np.broadcast_to(g, shape).astype(x.dtype),))


def weighted_sum(x: Tensor, w: np.ndarray) -> Tensor:
    """``sum(x * w)`` for a constant weight array, reduced in float64."""
    w = np.asarray(w)
    total = (x.data.astype(np.float64) * w).sum()
    return _emit(np.asarray(total, dtype=x.dtype), (x,), lambda g: ((g * w).astype(x.dtype),))


# --------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, param: Tensor, **hyper) -> AdamState:
        return cls(np.zeros_like(param.data), np.zeros_like(param.data), **hyper)


def adam_step(param: Tensor, grad: np.ndarray, state: AdamState) -> None:
    """Bias-corrected Adam update, in place on ``param`` and ``state``."""
    grad = np.asarray(grad)
    if grad.shape != param.shape or state.m.shape != param.shape:
        raise ShapeError(f"adam shapes disagree: param {param.shape}, grad {grad.shape}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1 - b1) * grad
    state.v *= b2
    state.v += (1 - b2) * grad * grad
    mhat = state.m / (1 - b1**state.step)
    vhat = state.v / (1 - b2**state.step)
    param.data -= (state.lr * mhat / (np.sqrt(vhat) + state.eps)).astype(param.dtype)


@dataclass
class Adam:
    """Adam over a fixed, ordered list of parameters with global-norm clipping."""

    params: list[Tensor]
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = 1.0
    states: list[AdamState] = field(default_factory=list)

    def __post_init__(self):
        if not self.states:
            self.states = [
                AdamState.for_param(p, lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps)
                for p in self.params
            ]

    @property
    def step_count(self) -> int:
        return self.states[0].step if self.states else 0

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def grad_norm(self) -> float:
        sq = 0.0
        for p in self.params:
            if p.grad is not None:
                sq += float(np.dot(p.grad.ravel().astype(np.float64), p.grad.ravel().astype(np.float64)))
        return math.sqrt(sq)

    def step(self) -> float:
        norm = self.grad_norm()
        if not math.isfinite(norm):
            raise FloatingPointError("non-finite gradient norm")
        scale = 1.0
        if self.clip_norm is not None and norm > self.clip_norm:
            scale = self.clip_norm / (norm + 1e-12)
        for p, st in zip(self.params, self.states):
            st.lr = self.lr
            g = np.zeros_like(p.data) if p.grad is None else p.grad
            adam_step(p, g * scale if scale != 1.0 else g, st)
        return norm
