"""Greedy autoregressive decoding and block-wise diffusion unmasking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .model import AttnMode, ModelParams, forward
from .numcore import _softmax_np

# (ids [B, L], key_valid [B, L]) -> logits [B, L, V]
LogitsFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DecodeCfg:
    max_new_tokens: int = 128
    temperature: float = 0.0
    block_length: int = 4
    remask_strategy: str = "low_confidence"

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.block_length < 1:
            raise ValueError("block_length must be >= 1")
        if self.remask_strategy != "low_confidence":
            raise ValueError(f"unsupported remasking strategy {self.remask_strategy!r}")

    @property
    def gen_length(self) -> int:
        """Diffusion answer region: max_new_tokens rounded down to whole blocks."""
        return (self.max_new_tokens // self.block_length) * self.block_length


def model_logits(params: ModelParams, mode: AttnMode) -> LogitsFn:
    def fn(ids, valid):
        return forward(ids, mode, params, valid).data

    return fn


def _pick(logits: np.ndarray, temperature: float, rng: np.random.Generator | None) -> np.ndarray:
    if temperature == 0:
        return logits.argmax(axis=-1)
    if rng is None:
        raise ValueError("sampling at temperature > 0 needs an rng")
    p = _softmax_np(logits.astype(np.float64) / temperature)
    return np.array([rng.choice(len(row), p=row) for row in p.reshape(-1, p.shape[-1])]).reshape(p.shape[:-1])


def ar_decode_batch(
    prompts: Sequence[Sequence[int]],
    params: ModelParams | None,
    cfg: DecodeCfg,
    eot_id: int,
    pad_id: int,
    logits_fn: LogitsFn | None = None,
    rng: np.random.Generator | None = None,
) -> list[list[int]]:
    """Greedy continuation of each prompt; returns only the new tokens.

    Generation for a row stops after it emits EOT (kept in the output) or
    after ``max_new_tokens`` tokens.
    """
    if logits_fn is None:
        logits_fn = model_logits(params, AttnMode.CAUSAL)
        max_len = params.config.max_len
    else:
        max_len = None
    lens = np.array([len(p) for p in prompts])
    if (lens == 0).any():
        raise ValueError("empty prompt")
    total = int(lens.max()) + cfg.max_new_tokens
    if max_len is not None and total > max_len:
        raise ValueError(f"prompt + {cfg.max_new_tokens} new tokens exceeds max_len {max_len}")
    B = len(prompts)
    buf = np.full((B, total), pad_id, dtype=np.int64)
    for i, p in enumerate(prompts):
        buf[i, : len(p)] = p
    cur = lens.copy()
    done = np.zeros(B, bool)
    out: list[list[int]] = [[] for _ in range(B)]
    for _ in range(cfg.max_new_tokens):
        if done.all():
            break
        width = int(cur.max())
        valid = np.arange(width)[None, :] < cur[:, None]
        logits = logits_fn(buf[:, :width], valid)
        last = logits[np.arange(B), cur - 1]
        nxt = _pick(last, cfg.temperature, rng)
        for i in np.flatnonzero(~done):
            tok = int(nxt[i])
            buf[i, cur[i]] = tok
            cur[i] += 1
            out[i].append(tok)
            if tok == eot_id:
                done[i] = True
    return out


def ar_decode(prompt, params, cfg: DecodeCfg, eot_id: int, pad_id: int, logits_fn=None, rng=None) -> list[int]:
    """Prompt followed by its greedy continuation."""
    if cfg.max_new_tokens == 0:
        return list(prompt)
    return list(prompt) + ar_decode_batch([prompt], params, cfg, eot_id, pad_id, logits_fn, rng)[0]


@dataclass
class DiffusionTrace:
    """Per-round record of a diffusion decode, for invariant checks."""

    forward_passes: int = 0
    commits: list[list[tuple[int, int]]] | None = None  # per row: (position, token) in commit order


def dllm_decode_batch(
    prompts: Sequence[Sequence[int]],
    params: ModelParams | None,
    cfg: DecodeCfg,
    gen_length: int,
    mask_id: int,
    eot_id: int,
    pad_id: int,
    logits_fn: LogitsFn | None = None,
    rng: np.random.Generator | None = None,
    trace: DiffusionTrace | None = None,
) -> list[list[int]]:
    """Low-confidence remasking over ``gen_length`` masks, one block at a time.

    Each block runs ``block_length`` rounds and commits one position per
    round: the still-masked position in the block whose argmax probability is
    highest, ties going to the lowest index. Committed tokens never change.
    Returns the generated region of each row cut after its first EOT.
    """
    bl = cfg.block_length
    if gen_length % bl:
        raise ValueError(f"gen_length {gen_length} is not a multiple of block_length {bl}")
    if logits_fn is None:
        logits_fn = model_logits(params, AttnMode.BIDIRECTIONAL)
        max_len = params.config.max_len
    else:
        max_len = None
    B = len(prompts)
    lens = np.array([len(p) for p in prompts])
    total = int(lens.max()) + gen_length
    if max_len is not None and total > max_len:
        raise ValueError(f"prompt + {gen_length} masks exceeds max_len {max_len}")
    buf = np.full((B, total), pad_id, dtype=np.int64)
    for i, p in enumerate(prompts):
        buf[i, : len(p)] = p
        buf[i, len(p) : len(p) + gen_length] = mask_id
    valid = np.arange(total)[None, :] < (lens + gen_length)[:, None]
    pending = np.zeros((B, total), bool)
    for i in range(B):
        pending[i, lens[i] : lens[i] + gen_length] = True
    rows = np.arange(B)
    if trace is not None:
        trace.commits = [[] for _ in range(B)]
    for b in range(gen_length // bl):
        block = lens[:, None] + b * bl + np.arange(bl)[None, :]  # [B, bl] absolute positions
        for _ in range(bl):
            logits = logits_fn(buf, valid)
            if trace is not None:
                trace.forward_passes += 1
            blk_logits = logits[rows[:, None], block].astype(np.float64)  # [B, bl, V]
            blk_logits[..., mask_id] = -np.inf
            if cfg.temperature == 0:
                cand = blk_logits.argmax(-1)
            else:
                cand = _pick(blk_logits, cfg.temperature, rng)
            probs = _softmax_np(blk_logits)
            conf = np.take_along_axis(probs, cand[..., None], -1)[..., 0]
            conf = np.where(pending[rows[:, None], block], conf, -np.inf)
            # argmax returns the first maximum, i.e. the lowest index on ties
            j = conf.argmax(axis=1)
            pos = block[rows, j]
            buf[rows, pos] = cand[rows, j]
            pending[rows, pos] = False
            if trace is not None:
                for i in range(B):
                    trace.commits[i].append((int(pos[i]), int(cand[i, j[i]])))
    out = []
    for i in range(B):
        gen = buf[i, lens[i] : lens[i] + gen_length]
        if pending[i].any() or (gen == mask_id).any():
            raise AssertionError("mask tokens remain after the final round")
        gen = gen.tolist()
        if eot_id in gen:
            gen = gen[: gen.index(eot_id) + 1]
        out.append(gen)
    return out


def dllm_decode(prompt, params, cfg: DecodeCfg, gen_length: int, mask_id, eot_id, pad_id, **kw) -> list[int]:
    """Prompt followed by the unmasked answer region."""
    return list(prompt) + dllm_decode_batch([prompt], params, cfg, gen_length, mask_id, eot_id, pad_id, **kw)[0]
