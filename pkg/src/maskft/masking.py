"""Forward corruption process: sample a mask ratio, then mask tokens."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MaskPolicy:
    """How mask ratios are drawn and what masked positions become.

    kind is one of ``uniform`` (t ~ U(lo, hi), rewrite to MASK), ``fixed``
    (t = lo, rewrite to MASK) or ``random_token`` (t ~ U(lo, hi), rewrite to
    a uniformly drawn ordinary-vocabulary id). ``random_token`` accepts
    ``lo == hi``; ``lo = hi = 1`` replaces the whole passage with noise.
    """

    kind: str = "uniform"
    lo: float = 0.05
    hi: float = 0.95

    def __post_init__(self):
        if self.kind == "fixed":
            if not 0.0 <= self.lo <= 1.0:
                raise ValueError(f"fixed mask ratio must lie in [0, 1], got {self.lo}")
        elif self.kind == "uniform":
            if not 0.0 <= self.lo < self.hi <= 1.0:
                raise ValueError(f"need 0 <= lo < hi <= 1, got ({self.lo}, {self.hi})")
        elif self.kind == "random_token":
            if not 0.0 <= self.lo <= self.hi <= 1.0:
                raise ValueError(f"need 0 <= lo <= hi <= 1, got ({self.lo}, {self.hi})")
        else:
            raise ValueError(f"unknown mask policy kind {self.kind!r}")

    @classmethod
    def uniform(cls, lo: float = 0.05, hi: float = 0.95) -> MaskPolicy:
        return cls("uniform", lo, hi)

    @classmethod
    def fixed(cls, t: float) -> MaskPolicy:
        return cls("fixed", t, t)

    @classmethod
    def random_token(cls, lo: float = 1.0, hi: float = 1.0) -> MaskPolicy:
        return cls("random_token", lo, hi)

    def describe(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.lo:g}"
        return f"{self.kind}:{self.lo:g}-{self.hi:g}"

    @classmethod
    def parse(cls, text: str) -> MaskPolicy:
        """Inverse of :meth:`describe`, e.g. ``uniform:0.05-0.95``, ``fixed:0.75``."""
        kind, _, rng = text.partition(":")
        if kind == "fixed":
            return cls.fixed(float(rng))
        lo, _, hi = rng.partition("-")
        return cls(kind, float(lo), float(hi))


@dataclass
class MaskedBatch:
    x0: np.ndarray
    xt: np.ndarray
    masked: np.ndarray  # bool, the index set M as a membership vector
    t: float
    maskable: np.ndarray

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.masked)


def sample_t(policy: MaskPolicy, rng: np.random.Generator) -> float:
    if policy.kind == "fixed" or policy.lo == policy.hi:
        return float(policy.lo)
    return float(rng.uniform(policy.lo, policy.hi))


def corrupt(
    x0,
    maskable,
    t: float,
    policy: MaskPolicy,
    rng: np.random.Generator,
    mask_id: int,
    ordinary_ids: np.ndarray | None = None,
) -> MaskedBatch:
    """Each maskable position joins M independently with probability ``t``."""
    x0 = np.asarray(x0, dtype=np.int64)
    maskable = np.asarray(maskable, dtype=bool)
    if x0.shape != maskable.shape:
        raise ValueError(f"maskable shape {maskable.shape} != sequence shape {x0.shape}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"mask ratio must lie in [0, 1], got {t}")
    masked = (rng.random(x0.shape) < t) & maskable
    xt = x0.copy()
    if policy.kind == "random_token":
        if ordinary_ids is None or len(ordinary_ids) == 0:
            raise ValueError("random_token policy needs the ordinary vocabulary ids")
        xt[masked] = rng.choice(ordinary_ids, size=int(masked.sum()))
    else:
        xt[masked] = mask_id
    return MaskedBatch(x0, xt, masked, float(t), maskable)


def corrupt_nonempty(x0, maskable, t, policy, rng, mask_id, ordinary_ids=None) -> MaskedBatch:
    """``corrupt`` with one resample when M comes out empty at ``t > 0``."""
    mb = corrupt(x0, maskable, t, policy, rng, mask_id, ordinary_ids)
    if t > 0 and not mb.masked.any():
        mb = corrupt(x0, maskable, t, policy, rng, mask_id, ordinary_ids)
    return mb
