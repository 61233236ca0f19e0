"""ROUGE-1 scoring, QA evaluation, checkpoint selection and convergence fits."""

from __future__ import annotations

import csv
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .datagen import BACKWARD, FORWARD, FactRecord
from .decode import DecodeCfg, ar_decode_batch, dllm_decode_batch
from .model import ModelParams
from .textcodec import ChatTurn, Vocab, decode, encode, render_chat

log = logging.getLogger(__name__)

_PUNCT = re.compile(r"[^\w\s]|_")


class Paradigm(str, Enum):
    AR = "AR"
    AR_MASKED = "ARMasked"
    DLLM = "DLLM"


def normalize(text: str) -> list[str]:
    return _PUNCT.sub(" ", text.lower()).split()


def rouge1(generated: str, gold: str) -> float:
    """Clipped unigram recall of ``gold`` words in ``generated``."""
    g = Counter(normalize(gold))
    if not g:
        raise ValueError("gold answer is empty after normalization")
    c = Counter(normalize(generated))
    hit = sum(min(n, c[w]) for w, n in g.items())
    return hit / sum(g.values())


@dataclass
class EvalReport:
    step: int
    per_category: dict[str, float]
    total: float
    items: list[tuple[str, str, float]] = field(default_factory=list, repr=False)  # (question, output, score)

    @property
    def forward(self) -> float:
        return self.per_category["Fwd"]

    @property
    def backward(self) -> float:
        return self.per_category["Bwd"]


def aggregate(step: int, scored: Iterable[tuple[str, str, float]]) -> EvalReport:
    """Build a report from ``(kind, style, score)`` triples.

    Forward and backward aggregates average the per-kind means, so N2D and
    D2N weigh equally; total is the mean of the two aggregates.
    """
    buckets: dict[tuple[str, str], list[float]] = {}
    for kind, style, s in scored:
        buckets.setdefault((kind, style), []).append(s)
    per: dict[str, float] = {}
    short = {FORWARD: "fwd", BACKWARD: "bwd"}
    kinds = sorted({k for k, _ in buckets})
    for kind in kinds:
        for style in (FORWARD, BACKWARD):
            if (kind, style) in buckets:
                per[f"{kind}-{short[style]}"] = float(np.mean(buckets[(kind, style)]))
    for style, name in ((FORWARD, "Fwd"), (BACKWARD, "Bwd")):
        means = [per[f"{k}-{short[style]}"] for k in kinds if f"{k}-{short[style]}" in per]
        per[name] = float(np.mean(means)) if means else 0.0
    return EvalReport(step, per, 0.5 * (per["Fwd"] + per["Bwd"]))


def build_prompt(question: str, paradigm: Paradigm, vocab: Vocab) -> list[int]:
    """Evaluation prompt ids for one question (the DLLM answer region is added by the decoder)."""
    if paradigm == Paradigm.AR_MASKED:
        return [vocab.bos_id] + render_chat([ChatTurn("user", question)], vocab, open_assistant=True).ids
    return [vocab.bos_id] + encode(question, vocab)


def strip_answer(ids: Sequence[int], vocab: Vocab) -> str:
    ids = list(ids)
    if vocab.eot_id in ids:
        ids = ids[: ids.index(vocab.eot_id)]
    ids = [i for i in ids if i not in vocab.special_ids]
    return decode(ids, vocab)


Responder = Callable[[list[str]], list[str]]


def generate_answers(
    params: ModelParams,
    questions: Sequence[str],
    paradigm: Paradigm,
    vocab: Vocab,
    cfg: DecodeCfg,
    batch_size: int = 64,
) -> list[str]:
    paradigm = Paradigm(paradigm)
    out: list[str] = []
    for s in range(0, len(questions), batch_size):
        chunk = questions[s : s + batch_size]
        prompts = [build_prompt(q, paradigm, vocab) for q in chunk]
        if paradigm == Paradigm.DLLM:
            gen = dllm_decode_batch(prompts, params, cfg, cfg.gen_length, vocab.mask_id, vocab.eot_id, vocab.pad_id)
        else:
            gen = ar_decode_batch(prompts, params, cfg, vocab.eot_id, vocab.pad_id)
        out += [strip_answer(g, vocab) for g in gen]
    return out


def evaluate(
    params: ModelParams | None,
    corpus: Sequence[FactRecord],
    paradigm: Paradigm | str,
    vocab: Vocab,
    cfg: DecodeCfg,
    step: int = 0,
    responder: Responder | None = None,
) -> EvalReport:
    """Answer every QA of ``corpus`` and score it with :func:`rouge1`.

    ``responder`` replaces the model (used for oracle and failure probes).
    Items whose generation fails score 0.
    """
    qas = [(r.kind, q) for r in corpus for q in r.qas]
    questions = [q.question for _, q in qas]
    try:
        if responder is not None:
            answers = responder(questions)
        else:
            answers = generate_answers(params, questions, Paradigm(paradigm), vocab, cfg)
    except (ValueError, IndexError, AssertionError) as exc:
        log.warning("batch generation failed (%s); retrying item by item", exc)
        answers = []
        for q in questions:
            try:
                a = responder([q])[0] if responder else generate_answers(params, [q], Paradigm(paradigm), vocab, cfg)[0]
            except (ValueError, IndexError, AssertionError) as item_exc:
                log.warning("generation failed for %r: %s", q, item_exc)
                a = ""
            answers.append(a)
    scored, items = [], []
    for (kind, q), a in zip(qas, answers):
        s = rouge1(a, q.answer) if a else 0.0
        scored.append((kind, q.style, s))
        items.append((q.question, a, s))
    rep = aggregate(step, scored)
    rep.items = items
    return rep


def best_checkpoint(reports: Sequence[EvalReport]) -> EvalReport:
    """Report with the highest total; the earliest step wins ties."""
    if not reports:
        raise ValueError("no reports to choose from")
    return min(reports, key=lambda r: (-r.total, r.step))


# --------------------------------------------------------------------------
# metrics CSV

CSV_FIELDS = ("step", "category", "accuracy", "total")


def append_csv(report: EvalReport, path: str | Path, extra: dict[str, str] | None = None) -> None:
    path = Path(path)
    fields = list(CSV_FIELDS) + sorted(extra or {})
    new = not path.exists()
    with open(path, "a", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(fields)
        for cat, acc in report.per_category.items():
            row = [report.step, cat, f"{acc:.6f}", f"{report.total:.6f}"]
            w.writerow(row + [extra[k] for k in sorted(extra or {})])


def read_csv(path: str | Path) -> list[EvalReport]:
    """Reports from a metrics CSV, one per step, in file order."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"metrics file not found: {path}")
    by_step: dict[int, EvalReport] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            step = int(row["step"])
            rep = by_step.setdefault(step, EvalReport(step, {}, float(row["total"])))
            rep.per_category[row["category"]] = float(row["accuracy"])
    return list(by_step.values())


# --------------------------------------------------------------------------
# convergence fit


@dataclass(frozen=True)
class ConvergenceFit:
    A: float
    k: float
    residual: float
    degenerate: bool = False


class FitError(RuntimeError):
    def __init__(self, msg: str, best: ConvergenceFit):
        super().__init__(msg)
        self.best = best


A_MAX = 1.1


def _model(A, k, x):
    return A * -np.expm1(-k * x)


def _rms(A, k, x, y) -> float:
    return float(np.sqrt(np.mean((_model(A, k, x) - y) ** 2)))


def _best_A(k, x, y):
    f = -np.expm1(-k * x)
    den = float(f @ f)
    return 0.0 if den == 0 else float(np.clip((f @ y) / den, 0.0, A_MAX))


def fit_convergence(curve: Sequence[tuple[float, float]], max_iter: int = 500, tol: float = 1e-15) -> ConvergenceFit:
    """Least-squares fit of ``A * (1 - exp(-k * step))``.

    A log-spaced grid over ``k`` (with ``A`` solved in closed form) seeds a
    damped Gauss-Newton (Levenberg-Marquardt) refinement in ``(A, log k)``.
    """
    pts = np.asarray(curve, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
        raise ValueError("need at least 4 (step, accuracy) points")
    x, y = pts[:, 0], pts[:, 1]
    if np.any(np.diff(x) <= 0):
        raise ValueError("steps must be strictly increasing")
    if not np.all(np.isfinite(pts)):
        raise ValueError("curve contains non-finite values")

    if np.allclose(y, 0.0):
        return ConvergenceFit(0.0, 0.0, _rms(0.0, 0.0, x, y), degenerate=True)

    span = x.max()
    grid = np.logspace(np.log10(1e-3 / span), np.log10(1e3 / max(x.min(), 1e-12)), 200)
    seeds = [(_rms(_best_A(k, x, y), k, x, y), k) for k in grid]
    _, k0 = min(seeds)
    p = np.array([_best_A(k0, x, y), np.log(k0)])
    log_k_lo, log_k_hi = np.log(grid[0]), np.log(grid[-1])

    def resid(p):
        return _model(p[0], np.exp(p[1]), x) - y

    def jac(p):
        k = np.exp(p[1])
        e = np.exp(-k * x)
        return np.stack([-np.expm1(-k * x), p[0] * x * e * k], axis=1)

    lam = 1e-3
    r = resid(p)
    cost = float(r @ r)
    converged = False
    for _ in range(max_iter):
        J = jac(p)
        g = J.T @ r
        H = J.T @ J
        step = np.linalg.solve(H + lam * np.diag(np.diag(H) + 1e-300), -g)
        cand = p + step
        cand[0] = np.clip(cand[0], 0.0, A_MAX)
        # k past the grid ends is flat (or saturated) over the observed steps
        cand[1] = np.clip(cand[1], log_k_lo, log_k_hi)
        rc = resid(cand)
        c_cost = float(rc @ rc)
        if c_cost <= cost:
            small = cost - c_cost <= tol * max(cost, 1e-300) or np.all(np.abs(cand - p) <= 1e-13 * (1 + np.abs(p)))
            p, r, cost = cand, rc, c_cost
            lam = max(lam / 10, 1e-12)
            if small or cost < 1e-30:
                converged = True
                break
        else:
            lam *= 10
            if lam > 1e12:
                converged = True  # no descent direction left: stationary point
                break
    A, k = float(p[0]), float(np.exp(p[1]))
    fit = ConvergenceFit(A, k, _rms(A, k, x, y), degenerate=A == 0.0)
    if not converged:
        raise FitError(f"no convergence after {max_iter} iterations", fit)
    return fit
