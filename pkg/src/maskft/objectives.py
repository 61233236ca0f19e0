"""Training losses: next-token, mask reconstruction, and masked SFT."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import numcore as nc
from .masking import MaskedBatch, MaskPolicy, corrupt_nonempty, sample_t
from .model import AttnMode, ModelParams, forward
from .numcore import Tensor
from .textcodec import NEWLINE, Vocab, encode, render_chat_ids

INSTRUCTION = "Return the recovered masked passage."
PREAMBLE = "Here is the recovered text:"
TEMPLATE_STRINGS = (INSTRUCTION, PREAMBLE)


@dataclass
class SftExample:
    full: np.ndarray
    loss_span: np.ndarray
    source: str = ""
    t: float = 0.0


def pad_batch(seqs: Sequence[Sequence[int]], pad_id: int) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad to a rectangle; returns ``(ids, valid)``."""
    L = max(len(s) for s in seqs)
    ids = np.full((len(seqs), L), pad_id, dtype=np.int64)
    valid = np.zeros((len(seqs), L), dtype=bool)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
        valid[i, : len(s)] = True
    return ids, valid


def causal_span_loss(
    seqs: Sequence[Sequence[int]],
    spans: Sequence[Sequence[bool]],
    params: ModelParams,
    pad_id: int,
) -> tuple[Tensor, float]:
    """Causal cross-entropy on positions flagged in ``spans``.

    Each sequence contributes the mean over its flagged positions; the batch
    loss is the mean over sequences. Position 0 can never be a target.
    """
    ids, valid = pad_batch(seqs, pad_id)
    span = np.zeros_like(valid)
    for i, s in enumerate(spans):
        s = np.asarray(s, dtype=bool)
        if s[0]:
            raise ValueError("position 0 has no left context and cannot be a target")
        span[i, : len(s)] = s
    span &= valid
    counts = span.sum(axis=1)
    if (counts == 0).any():
        raise ValueError("every sequence needs at least one loss position")
    logits = forward(ids, AttnMode.CAUSAL, params, valid)
    target = span[:, 1:]
    per, _ = nc.cross_entropy(_drop_last(logits), ids[:, 1:], ~target)
    weights = target / counts[:, None] / len(seqs)
    loss = nc.weighted_sum(per, weights)
    return loss, float(loss.data)


def _drop_last(logits: Tensor) -> Tensor:
    shape = logits.shape

    def fn(g):
        full = np.zeros(shape, dtype=g.dtype)
        full[:, :-1] = g
        return (full,)

    return nc._emit(logits.data[:, :-1], (logits,), fn)


def ar_loss(seqs: Sequence[Sequence[int]], params: ModelParams, pad_id: int) -> tuple[Tensor, float]:
    """Mean next-token loss over every position after the first."""
    spans = []
    for s in seqs:
        if len(s) < 2:
            raise ValueError("ar_loss needs sequences of length >= 2")
        m = np.ones(len(s), bool)
        m[0] = False
        spans.append(m)
    return causal_span_loss(seqs, spans, params, pad_id)


def diffusion_loss(
    batches: Sequence[MaskedBatch],
    params: ModelParams,
    pad_id: int,
    length_normalize: bool = False,
) -> tuple[Tensor, float]:
    """Mask reconstruction loss, ``(1/t) * sum_{l in M} -log p(x0_l | xt)``.

    Averaged over the sequences in ``batches``. With ``length_normalize`` each
    sequence's term is additionally divided by its length.
    """
    for mb in batches:
        if mb.t == 0 and mb.masked.any():
            raise ValueError("t == 0 with a non-empty mask set")
    xt, valid = pad_batch([mb.xt for mb in batches], pad_id)
    x0, _ = pad_batch([mb.x0 for mb in batches], pad_id)
    masked, _ = pad_batch([mb.masked.astype(np.int64) for mb in batches], 0)
    masked = masked.astype(bool)
    w = np.zeros(masked.shape)
    for i, mb in enumerate(batches):
        if mb.masked.any():
            w[i] = masked[i] / mb.t
            if length_normalize:
                w[i] /= len(mb.x0)
    w /= len(batches)
    if not masked.any():
        zero = nc.Tensor(np.zeros((), dtype=params["tok_emb"].dtype))
        return zero, 0.0
    logits = forward(xt, AttnMode.BIDIRECTIONAL, params, valid)
    per, _ = nc.cross_entropy(logits, np.where(masked, x0, 0), ~masked)
    loss = nc.weighted_sum(per, w)
    return loss, float(loss.data)


def masked_sft_prompt(xt: Sequence[int], vocab: Vocab) -> list[int]:
    """User-turn content: corrupted passage, newline, recovery instruction."""
    return list(xt) + [vocab.id(NEWLINE)] + encode(INSTRUCTION, vocab)


def build_masked_sft(
    doc: Sequence[int],
    policy: MaskPolicy,
    vocab: Vocab,
    rng: np.random.Generator,
    max_len: int | None = None,
    t: float | None = None,
    source: str = "",
) -> SftExample:
    """Two-turn masked fine-tuning conversation for one clean passage.

    Loss covers the clean passage in the assistant turn plus its closing EOT;
    the preamble and every user token are excluded. ``t`` overrides the
    policy draw (used for per-batch ratio sampling).
    """
    doc = np.asarray(doc, dtype=np.int64)
    if len(doc) == 0:
        raise ValueError("empty passage")
    if any(int(i) in vocab.special_ids for i in doc):
        raise ValueError("passage must not contain special tokens")
    if t is None:
        t = sample_t(policy, rng)
    mb = corrupt_nonempty(
        doc, np.ones(len(doc), bool), t, policy, rng, vocab.mask_id, vocab.ordinary_ids()
    )
    answer = encode(PREAMBLE, vocab) + [vocab.id(NEWLINE)]
    rendered = render_chat_ids(
        [("user", masked_sft_prompt(mb.xt, vocab)), ("assistant", answer + list(doc))], vocab
    )
    full = np.array([vocab.bos_id] + rendered.ids, dtype=np.int64)
    a_start, a_end = rendered.spans[1]
    span = np.zeros(len(full), bool)
    # +1 for the BOS prefix; the passage starts after the preamble, EOT follows a_end
    span[1 + a_start + len(answer) : 1 + a_end + 1] = True
    if max_len is not None and len(full) > max_len:
        raise ValueError(f"rendered example has {len(full)} tokens, budget is {max_len}")
    return SftExample(full, span, source, t)


def masked_sft_loss(examples: Sequence[SftExample], params: ModelParams, pad_id: int) -> tuple[Tensor, float]:
    for ex in examples:
        if not ex.loss_span.any():
            raise ValueError("empty loss span")
    return causal_span_loss([e.full for e in examples], [e.loss_span for e in examples], params, pad_id)
