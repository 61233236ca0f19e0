"""Pre-norm transformer usable with causal or bidirectional attention.

The same parameters serve both paradigms; only the attention mask differs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import numcore as nc
from .numcore import Tensor


class AttnMode(enum.Enum):
    CAUSAL = "causal"
    BIDIRECTIONAL = "bidirectional"


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    n_layers: int = 4
    n_heads: int = 4
    d_model: int = 128
    max_len: int = 256

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return asdict(self)


class ModelParams:
    """Named parameter tensors in a fixed order (the checkpoint order)."""

    def __init__(self, config: ModelConfig, tensors: dict[str, Tensor]):
        self.config = config
        self.tensors = tensors

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def values(self) -> list[Tensor]:
        return list(self.tensors.values())

    def num_params(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def astype(self, dtype) -> ModelParams:
        return ModelParams(
            self.config,
            {k: Tensor(v.data.astype(dtype), requires_grad=True, name=k) for k, v in self.tensors.items()},
        )

    def copy(self) -> ModelParams:
        return self.astype(self.tensors["tok_emb"].dtype)


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, V = cfg.d_model, cfg.vocab_size
    shapes = {"tok_emb": (V, d), "pos_emb": (cfg.max_len, d)}
    for i in range(cfg.n_layers):
        p = f"h{i}."
        shapes.update({
            p + "ln1.g": (d,), p + "ln1.b": (d,),
            p + "attn.qkv": (d, 3 * d), p + "attn.qkv_b": (3 * d,),
            p + "attn.proj": (d, d), p + "attn.proj_b": (d,),
            p + "ln2.g": (d,), p + "ln2.b": (d,),
            p + "mlp.fc": (d, 4 * d), p + "mlp.fc_b": (4 * d,),
            p + "mlp.proj": (4 * d, d), p + "mlp.proj_b": (d,),
        })
    shapes.update({"ln_f.g": (d,), "ln_f.b": (d,), "lm_head": (d, V)})
    return shapes


def init_params(cfg: ModelConfig, seed: int, dtype=np.float32) -> ModelParams:
    rng = np.random.default_rng(seed)
    resid_std = 0.02 / math.sqrt(2 * cfg.n_layers)
    tensors = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".g"):
            arr = np.ones(shape)
        elif name.endswith("_b") or name.endswith(".b"):
            arr = np.zeros(shape)
        elif name.endswith("attn.proj") or name.endswith("mlp.proj"):
            arr = rng.normal(0.0, resid_std, shape)
        else:
            arr = rng.normal(0.0, 0.02, shape)
        tensors[name] = Tensor(arr.astype(dtype), requires_grad=True, name=name)
    return ModelParams(cfg, tensors)


def attention_allowed(mode: AttnMode, key_valid: np.ndarray) -> np.ndarray:
    """Boolean [B, 1, L, L] mask of which keys each query may attend to."""
    B, L = key_valid.shape
    allowed = np.broadcast_to(key_valid[:, None, None, :], (B, 1, L, L))
    if mode is AttnMode.CAUSAL:
        allowed = allowed & np.tril(np.ones((L, L), bool))[None, None]
    # a fully masked row (padding query) falls back to attending to itself
    return allowed | np.eye(L, dtype=bool)[None, None]


def forward(
    ids: np.ndarray,
    mode: AttnMode,
    params: ModelParams,
    key_valid: np.ndarray | None = None,
) -> Tensor:
    """Logits for a token batch.

    ``ids`` is ``[L]`` or ``[B, L]``; returns ``[L, V]`` or ``[B, L, V]``.
    ``key_valid`` marks real (non-padding) positions that may be attended to.
    """
    cfg = params.config
    ids = np.asarray(ids, dtype=np.int64)
    single = ids.ndim == 1
    if single:
        ids = ids[None]
    B, L = ids.shape
    if L > cfg.max_len:
        raise ValueError(f"sequence length {L} exceeds max_len {cfg.max_len}")
    if key_valid is None:
        key_valid = np.ones((B, L), bool)
    allowed = attention_allowed(mode, np.asarray(key_valid, bool))

    H, Dh, d = cfg.n_heads, cfg.head_dim, cfg.d_model
    x = nc.embedding(params["tok_emb"], ids) + nc.embedding(params["pos_emb"], np.arange(L))
    scale = 1.0 / math.sqrt(Dh)
    for i in range(cfg.n_layers):
        p = f"h{i}."
        h = nc.layer_norm(x, params[p + "ln1.g"], params[p + "ln1.b"])
        qkv = nc.matmul(h, params[p + "attn.qkv"]) + params[p + "attn.qkv_b"]
        qkv = nc.transpose(nc.reshape(qkv, (B, L, 3, H, Dh)), (2, 0, 3, 1, 4))
        q, k, v = (_select(qkv, j) for j in range(3))
        att = nc.matmul(q, nc.transpose(k, (0, 1, 3, 2))) * scale
        att = nc.softmax(att, allowed)
        y = nc.matmul(att, v)
        y = nc.reshape(nc.transpose(y, (0, 2, 1, 3)), (B, L, d))
        x = x + (nc.matmul(y, params[p + "attn.proj"]) + params[p + "attn.proj_b"])
        h = nc.layer_norm(x, params[p + "ln2.g"], params[p + "ln2.b"])
        h = nc.gelu(nc.matmul(h, params[p + "mlp.fc"]) + params[p + "mlp.fc_b"])
        x = x + (nc.matmul(h, params[p + "mlp.proj"]) + params[p + "mlp.proj_b"])
    x = nc.layer_norm(x, params["ln_f.g"], params["ln_f.b"])
    logits = nc.matmul(x, params["lm_head"])
    if single:
        logits = nc.reshape(logits, (L, cfg.vocab_size))
    return logits


def _select(x: Tensor, j: int) -> Tensor:
    """``x[j]`` along the leading axis, differentiable."""
    shape = x.shape

    def fn(g):
        full = np.zeros(shape, dtype=g.dtype)
        full[j] = g
        return (full,)

    return nc._emit(x.data[j], (x,), fn)
