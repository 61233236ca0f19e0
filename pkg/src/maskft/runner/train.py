"""Pretraining and fine-tuning loops."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .. import numcore as nc
from ..evalkit import EvalReport, Paradigm
from ..masking import MaskPolicy
from ..model import ModelParams
from ..objectives import causal_span_loss, diffusion_loss
from ..textcodec import Vocab
from .data import Example, diffusion_corrupt

log = logging.getLogger(__name__)


class DivergenceError(FloatingPointError):
    pass


def make_optimizer(params: ModelParams, lr: float) -> nc.Adam:
    return nc.Adam(params.values(), lr=lr)


def train_step(
    params: ModelParams,
    opt: nc.Adam,
    batch: Sequence[Example],
    objective: str,
    vocab: Vocab,
    rng: np.random.Generator,
    policy: MaskPolicy | None = None,
) -> float:
    """One optimizer update on ``batch``; returns the loss value."""
    with nc.GradTape() as tape:
        if objective == "causal":
            loss, val = causal_span_loss([e.ids for e in batch], [e.flags for e in batch], params, vocab.pad_id)
        elif objective == "diffusion":
            mbs = diffusion_corrupt(batch, policy or MaskPolicy.uniform(), vocab, rng)
            loss, val = diffusion_loss(mbs, params, vocab.pad_id)
        else:
            raise ValueError(f"unknown objective {objective!r}")
        if not math.isfinite(val):
            raise DivergenceError(f"loss became {val} at optimizer step {opt.step_count + 1}")
        if loss.requires_grad:
            tape.backward(loss)
    opt.step()
    opt.zero_grad()
    return val


def objective_for(paradigm: Paradigm) -> str:
    return "diffusion" if Paradigm(paradigm) == Paradigm.DLLM else "causal"


@dataclass
class LossLog:
    steps: list[int] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)

    def add(self, step: int, loss: float) -> None:
        self.steps.append(step)
        self.losses.append(loss)


def run_steps(
    params: ModelParams,
    opt: nc.Adam,
    make_batch: Callable[[int], list[Example]],
    objective: str,
    vocab: Vocab,
    rng: np.random.Generator,
    steps: int,
    policy: MaskPolicy | None = None,
    on_step: Callable[[int, float], None] | None = None,
    log_every: int = 100,
) -> LossLog:
    hist = LossLog()
    t0 = time.time()
    for s in range(1, steps + 1):
        val = train_step(params, opt, make_batch(s), objective, vocab, rng, policy)
        hist.add(s, val)
        if log_every and s % log_every == 0:
            recent = float(np.mean(hist.losses[-log_every:]))
            log.info("step %d loss %.4f (%.1fs)", s, recent, time.time() - t0)
        if on_step is not None:
            on_step(s, val)
    return hist
