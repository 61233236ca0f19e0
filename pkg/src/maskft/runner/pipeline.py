"""Pretraining, fine-tuning and sweeps over the toy NameDescription task."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from ..datagen import record_entities
from ..decode import DecodeCfg
from ..evalkit import EvalReport, Paradigm, append_csv, best_checkpoint, evaluate
from ..masking import MaskPolicy, sample_t
from ..model import ModelConfig, init_params
from ..textcodec import Vocab
from . import checkpoint as ckpt
from .config import RunConfig
from .data import (
    Corpora, Example, bank_vocab, causal_doc, causal_qa, chat_qa, chat_recovery, diffusion_doc, diffusion_qa,
    fresh_statements, make_corpora, qa_answer,
)
from .train import LossLog, make_optimizer, objective_for, train_step

log = logging.getLogger(__name__)

CAUSAL_BASE = "causal"
DIFFUSION_BASE = "diffusion"
METRICS_FILE = "metrics.csv"
CONFIG_FILE = "config.ini"


def base_kind(paradigm: Paradigm | str) -> str:
    return DIFFUSION_BASE if Paradigm(paradigm) == Paradigm.DLLM else CAUSAL_BASE


def run_vocab(cfg: RunConfig) -> Vocab:
    return bank_vocab(dataset=cfg.dataset)


def model_config(cfg: RunConfig, vocab: Vocab) -> ModelConfig:
    return ModelConfig(len(vocab), cfg.n_layers, cfg.n_heads, cfg.d_model, cfg.max_len)


def run_corpora(cfg: RunConfig) -> Corpora:
    return make_corpora(cfg.n_each, cfg.generic_each, cfg.paras_per_fact, cfg.data_seed,
                        generic_qa_frac=cfg.generic_qa_frac)


def decode_cfg(cfg: RunConfig) -> DecodeCfg:
    return DecodeCfg(max_new_tokens=cfg.max_new_tokens, block_length=cfg.block_length)


# --------------------------------------------------------------------------
# pretraining


_PRETRAIN_KEYS = ("dataset", "n_each", "paras_per_fact", "generic_each", "generic_qa_frac", "data_seed",
                  "n_layers", "n_heads", "d_model", "max_len", "pretrain_steps", "pretrain_lr", "pretrain_batch",
                  "max_new_tokens", "block_length")


def pretrain_key(cfg: RunConfig) -> str:
    """Cache key of the base model a run starts from."""
    blob = {k: getattr(cfg, k) for k in _PRETRAIN_KEYS}
    blob["base"] = base_kind(cfg.paradigm)
    digest = hashlib.sha256(json.dumps(blob, sort_keys=True).encode()).hexdigest()[:12]
    return f"{blob['base']}-{digest}"


def _pretrain_sources(cfg: RunConfig, corpora: Corpora, vocab: Vocab, kind: str,
                      rng: np.random.Generator) -> list[Callable[[int], list[Example]]]:
    """One batch drawer per example kind, in rotation order."""
    generic = corpora.generic
    with_qa = generic[: corpora.generic_qa]
    docs = [p for r in generic for p in r.passages("same_order")]

    def pool(examples):
        return lambda n: [examples[i] for i in rng.integers(len(examples), size=n)]

    if kind == DIFFUSION_BASE:
        gen_length = decode_cfg(cfg).gen_length
        return [
            pool([diffusion_doc(p, vocab) for p in docs]),
            pool([diffusion_qa(q.question, qa_answer(r), vocab, gen_length) for r in with_qa for q in r.qas]),
        ]

    qas = [(q.question, qa_answer(r)) for r in with_qa for q in r.qas]
    # down to t=0 so the base can already copy a fully visible passage
    policy = MaskPolicy.uniform(0.0, 0.95)
    taken = record_entities(corpora.knowledge)

    def recover_fresh(n):
        # unseen facts, so recovery has to be learned as copying from context
        texts = fresh_statements(n, int(rng.integers(2**31)), taken)
        return [chat_recovery(x, policy, vocab, rng) for x in texts]

    def recover_known(n):
        return [chat_recovery(docs[i], policy, vocab, rng) for i in rng.integers(len(docs), size=n)]

    return [
        pool([causal_doc(p, vocab) for p in docs]),
        recover_fresh,
        pool([causal_qa(q, a, vocab) for q, a in qas]),
        recover_known,
        pool([chat_qa(q, a, vocab) for q, a in qas]),
        recover_fresh,
    ]


def pretrain(cfg: RunConfig, kind: str | None = None, log_every: int = 100) -> tuple[ckpt.Checkpoint, LossLog]:
    """Train a base model on the generic distractor corpus.

    Causal bases see documents, raw QA, chat QA and masked-recovery
    conversations (on generic facts and on newly drawn ones); diffusion bases
    see documents and QA with the answer region padded to the decoder length.
    Every batch holds one example kind (rotating by step) so padding stays
    short.
    """
    kind = kind or base_kind(cfg.paradigm)
    vocab = run_vocab(cfg)
    corpora = run_corpora(cfg)
    mcfg = model_config(cfg, vocab)
    params = init_params(mcfg, cfg.data_seed)
    opt = make_optimizer(params, cfg.pretrain_lr)
    rng = np.random.default_rng([cfg.data_seed, 1])
    sources = _pretrain_sources(cfg, corpora, vocab, kind, rng)
    objective = "diffusion" if kind == DIFFUSION_BASE else "causal"

    def batch(step: int) -> list[Example]:
        return sources[step % len(sources)](cfg.pretrain_batch)

    hist = LossLog()
    t0 = time.time()
    for s in range(1, cfg.pretrain_steps + 1):
        val = train_step(params, opt, batch(s), objective, vocab, rng, MaskPolicy.uniform())
        hist.add(s, val)
        if log_every and s % log_every == 0:
            log.info("pretrain %s step %d loss %.4f (%.0fs)", kind, s, np.mean(hist.losses[-log_every:]),
                     time.time() - t0)
    meta = {"kind": kind, "vocab_size": len(vocab), "dataset": cfg.dataset}
    return ckpt.Checkpoint(params, cfg.pretrain_steps, cfg.data_seed, None, meta), hist


def write_loss_curve(hist: LossLog, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,loss\n")
        for s, v in zip(hist.steps, hist.losses):
            fh.write(f"{s},{v:.6f}\n")


def ensure_base(cfg: RunConfig, cache_dir: str | Path) -> ckpt.Checkpoint:
    """Load the cached base for ``cfg`` or pretrain and cache it."""
    if cfg.base:
        return ckpt.load(cfg.base)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"base-{pretrain_key(cfg)}.ckpt"
    if path.exists():
        log.info("using cached base %s", path)
        return ckpt.load(path)
    base, hist = pretrain(cfg)
    ckpt.save(base, path)
    write_loss_curve(hist, path.with_suffix(".loss.csv"))
    return base


# --------------------------------------------------------------------------
# fine-tuning


def training_passages(cfg: RunConfig, corpora: Corpora) -> list[str]:
    return [p for r in corpora.knowledge for p in r.passages(cfg.usage)]


def epoch_stream(n: int, rng: np.random.Generator) -> Iterator[int]:
    """Indices in reshuffled epochs: each epoch visits every item exactly once."""
    while True:
        yield from rng.permutation(n).tolist()


def _example_maker(cfg: RunConfig, vocab: Vocab, rng: np.random.Generator):
    paradigm = cfg.paradigm_enum
    policy = cfg.policy
    if paradigm == Paradigm.AR:
        return lambda texts: [causal_doc(t, vocab) for t in texts]
    if paradigm == Paradigm.DLLM:
        return lambda texts: [diffusion_doc(t, vocab) for t in texts]

    def recovery(texts):
        t = sample_t(policy, rng) if cfg.t_sampling == "per_batch" else None
        return [chat_recovery(x, policy, vocab, rng, t=t) for x in texts]
    return recovery


@dataclass
class FinetuneResult:
    reports: list[EvalReport]
    out_dir: Path
    checkpoints: dict[int, Path] = field(default_factory=dict)

    @property
    def best(self) -> EvalReport:
        return best_checkpoint(self.reports)


def finetune(base: ckpt.Checkpoint, cfg: RunConfig, out_dir: str | Path | None = None) -> FinetuneResult:
    """Fine-tune ``base`` on the knowledge facts, evaluating every interval.

    Writes the resolved config, a metrics CSV and checkpoints (every
    evaluation, or only the best one with ``keep = best``) to ``out_dir``.
    """
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / CONFIG_FILE)
    metrics = out / METRICS_FILE
    if metrics.exists():
        metrics.unlink()

    vocab = run_vocab(cfg)
    mcfg = model_config(cfg, vocab)
    if base.params.config != mcfg:
        raise ckpt.CheckpointError(f"base model {base.params.config} is incompatible with run config {mcfg}")
    if base.meta and base.meta.get("kind") not in (None, base_kind(cfg.paradigm)):
        log.warning("base was pretrained as %s, run paradigm is %s", base.meta.get("kind"), cfg.paradigm)
    corpora = run_corpora(cfg)
    texts = training_passages(cfg, corpora)
    params = base.params.copy()
    opt = make_optimizer(params, cfg.resolved_lr)
    rng = np.random.default_rng([cfg.seed, 2])
    order = epoch_stream(len(texts), rng)
    make = _example_maker(cfg, vocab, rng)
    objective = objective_for(cfg.paradigm_enum)
    dcfg = decode_cfg(cfg)
    result = FinetuneResult([], out)

    def checkpoint(step: int) -> None:
        rep = evaluate(params, corpora.knowledge, cfg.paradigm_enum, vocab, dcfg, step=step)
        result.reports.append(rep)
        append_csv(rep, metrics)
        log.info("%s step %d fwd %.3f bwd %.3f total %.3f", cfg.paradigm, step, rep.forward, rep.backward, rep.total)
        meta = {"paradigm": cfg.paradigm, "total": rep.total}
        if cfg.keep == "all":
            path = out / f"step_{step:06d}.ckpt"
        elif result.best is rep:
            path = out / "best.ckpt"
        else:
            return
        ckpt.save(ckpt.Checkpoint(params, step, cfg.seed, opt, meta), path)
        result.checkpoints[step] = path

    checkpoint(0)
    for s in range(1, cfg.steps + 1):
        batch = make([texts[next(order)] for _ in range(cfg.batch_size)])
        train_step(params, opt, batch, objective, vocab, rng, cfg.policy)
        if s % cfg.eval_interval == 0 or s == cfg.steps:
            checkpoint(s)
    return result


# --------------------------------------------------------------------------
# sweeps

SWEEP_AXES = ("lr", "fixed_t", "seed")


def sweep_config(cfg: RunConfig, axis: str, value: float) -> RunConfig:
    if axis == "lr":
        return cfg.replace(lr=float(value))
    if axis == "fixed_t":
        return cfg.replace(mask_policy=MaskPolicy.fixed(float(value)).describe())
    if axis == "seed":
        return cfg.replace(seed=int(value))
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


@dataclass
class SweepOutcome:
    value: float
    out_dir: Path
    result: FinetuneResult | None = None
    error: str | None = None


def sweep(cfg: RunConfig, axis: str, values: Sequence[float], base: ckpt.Checkpoint,
          parallelism: int = 1) -> list[SweepOutcome]:
    """One fine-tune per value from a shared base; a failing value is recorded and skipped.

    Writes ``sweep.csv`` under ``cfg.out_dir`` keyed by the axis value.
    """
    if not values:
        raise ValueError("sweep needs at least one value")
    root = Path(cfg.out_dir)
    root.mkdir(parents=True, exist_ok=True)

    def one(value) -> SweepOutcome:
        out = root / f"{axis}={value:g}"
        try:
            run = sweep_config(cfg, axis, value)
            return SweepOutcome(value, out, finetune(base, run, out))
        except Exception as exc:  # noqa: BLE001 - isolation is the point
            log.error("sweep %s=%g failed: %s", axis, value, exc)
            return SweepOutcome(value, out, error=f"{type(exc).__name__}: {exc}")

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(one, values))
    else:
        outcomes = [one(v) for v in values]
    write_sweep_csv(axis, outcomes, root / "sweep.csv")
    return outcomes


def write_sweep_csv(axis: str, outcomes: Sequence[SweepOutcome], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{axis},step,category,accuracy,total,error\n")
        for o in outcomes:
            if o.result is None:
                fh.write(f"{o.value:g},,,,,{o.error.replace(',', ';')}\n")
                continue
            for rep in o.result.reports:
                for cat, acc in rep.per_category.items():
                    fh.write(f"{o.value:g},{rep.step},{cat},{acc:.6f},{rep.total:.6f},\n")
