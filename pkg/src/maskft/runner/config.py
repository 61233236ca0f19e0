"""Run configuration, presets and the INI file format."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..evalkit import Paradigm
from ..masking import MaskPolicy

FULL_LR = {Paradigm.AR: 5e-6, Paradigm.DLLM: 1e-5, Paradigm.AR_MASKED: 3e-6}
# toy budgets come from per-paradigm sweeps on the toy preset (3 seeds each)
TOY_LR = {Paradigm.AR: 1e-3, Paradigm.DLLM: 1e-3, Paradigm.AR_MASKED: 1e-3}
TOY_STEPS = {Paradigm.AR: 300, Paradigm.DLLM: 600, Paradigm.AR_MASKED: 400}
TOY_PRETRAIN_STEPS = {Paradigm.AR: 3000, Paradigm.DLLM: 5000, Paradigm.AR_MASKED: 3000}
USAGES = ("none", "same_order", "permute_order")

# INI section for each field
_SECTIONS = {
    "data": ("dataset", "n_each", "paras_per_fact", "usage", "generic_each", "generic_qa_frac", "data_seed"),
    "model": ("n_layers", "n_heads", "d_model", "max_len"),
    "train": ("paradigm", "mask_policy", "t_sampling", "lr", "batch_size", "steps", "seed",
              "pretrain_steps", "pretrain_lr", "pretrain_batch"),
    "eval": ("eval_interval", "max_new_tokens", "block_length", "keep"),
    "run": ("out_dir", "base"),
}


@dataclass
class RunConfig:
    dataset: str = "NameDescription"
    n_each: int = 30
    paras_per_fact: int = 30
    usage: str = "none"
    generic_each: int = 100
    generic_qa_frac: float = 0.5
    data_seed: int = 0

    n_layers: int = 4
    n_heads: int = 4
    d_model: int = 128
    max_len: int = 256

    paradigm: str = "AR"
    mask_policy: str = "uniform:0.05-0.95"
    t_sampling: str = "per_sequence"
    lr: float | None = None  # None: the paradigm default
    batch_size: int = 64
    steps: int = 1000
    seed: int = 0
    pretrain_steps: int = 4000
    pretrain_lr: float = 1e-3
    pretrain_batch: int = 32

    eval_interval: int = 50
    max_new_tokens: int = 128
    block_length: int = 4
    keep: str = "all"

    out_dir: str = "runs/default"
    base: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        Paradigm(self.paradigm)
        MaskPolicy.parse(self.mask_policy)
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.eval_interval < 1:
            raise ValueError("eval_interval must be >= 1")
        if self.steps < 0 or self.pretrain_steps < 0:
            raise ValueError("step counts must be >= 0")
        if self.usage not in USAGES:
            raise ValueError(f"usage must be one of {USAGES}")
        if self.t_sampling not in ("per_sequence", "per_batch"):
            raise ValueError("t_sampling must be per_sequence or per_batch")
        if self.keep not in ("all", "best"):
            raise ValueError("keep must be all or best")
        if self.dataset != "NameDescription":
            raise ValueError("training runs support the NameDescription dataset")

    @property
    def paradigm_enum(self) -> Paradigm:
        return Paradigm(self.paradigm)

    @property
    def policy(self) -> MaskPolicy:
        return MaskPolicy.parse(self.mask_policy)

    @property
    def resolved_lr(self) -> float:
        return self.lr if self.lr is not None else FULL_LR[self.paradigm_enum]

    def replace(self, **kw) -> RunConfig:
        return dataclasses.replace(self, **kw)

    # ---- INI round trip

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for sec, keys in _SECTIONS.items():
            cp[sec] = {k: "" if getattr(self, k) is None else str(getattr(self, k)) for k in keys}
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines += [f"{k} = {v}" for k, v in cp[sec].items()]
            lines.append("")
        return "\n".join(lines)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_ini(), encoding="utf-8")

    @classmethod
    def from_ini(cls, text: str, base: RunConfig | None = None) -> RunConfig:
        cp = configparser.ConfigParser(interpolation=None)
        cp.read_string(text)
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for sec in cp.sections():
            if sec not in _SECTIONS:
                raise ValueError(f"unknown config section [{sec}]")
            for k, v in cp[sec].items():
                if k not in _SECTIONS[sec]:
                    raise ValueError(f"unknown key {k!r} in [{sec}]")
                kw[k] = _coerce(types[k], v)
        return dataclasses.replace(base or cls(), **kw)

    @classmethod
    def load(cls, path: str | Path, base: RunConfig | None = None) -> RunConfig:
        return cls.from_ini(Path(path).read_text(encoding="utf-8"), base)


def _coerce(typ: str, v: str):
    if typ == "int":
        return int(v)
    if typ == "float":
        return float(v)
    if typ == "float | None":
        return None if v.strip() == "" else float(v)
    return v


def toy_preset(paradigm: str | Paradigm = "AR", **overrides) -> RunConfig:
    """Small-scale settings: 10 N2D + 10 D2N facts and a 4-layer model."""
    p = Paradigm(paradigm)
    cfg = RunConfig(
        n_each=10, paras_per_fact=5, generic_each=100,
        max_len=128, paradigm=p.value, lr=TOY_LR[p],
        batch_size=10, steps=TOY_STEPS[p], eval_interval=20, max_new_tokens=16,
        pretrain_steps=TOY_PRETRAIN_STEPS[p], pretrain_lr=1e-3, pretrain_batch=32,
    )
    return cfg.replace(**overrides)


PRESETS = {"full": lambda paradigm="AR", **kw: RunConfig(paradigm=Paradigm(paradigm).value, **kw),
           "toy": toy_preset}
