"""Vocabulary, corpora and per-paradigm training examples."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import bank as B
from ..bank import DEFAULT_BANK, TemplateBank
from ..datagen import FactRecord, gen_name_description_set, record_entities
from ..masking import MaskPolicy, corrupt_nonempty, sample_t
from ..objectives import INSTRUCTION, PREAMBLE, build_masked_sft
from ..textcodec import TEMPLATE_TEXT, ChatTurn, Vocab, build_vocab, encode, render_chat

_SLOT = re.compile(r"\{[A-Za-z0-9_]*\}")


def bank_texts(bank: TemplateBank = DEFAULT_BANK, dataset: str = "all") -> list[str]:
    """Every string the generators of ``dataset`` can emit, as vocabulary source text.

    ``dataset`` is ``NameDescription`` or ``all``; a narrower vocabulary keeps
    the output layer small for toy runs.
    """
    frames: list[str] = [B.N2D_ORIGINAL, B.D2N_ORIGINAL, *B.N2D_PREFIXES, *B.N2D_VERBS, *B.N2D_SUFFIXES,
                         *B.D2N_PREFIXES, *B.D2N_VERBS, *B.D2N_SUFFIXES, *B.ASK_DESC, *B.ASK_NAME]
    pools = [bank.first_names, bank.last_names, bank.title_adj, bank.title_noun, bank.roles]
    texts = [TEMPLATE_TEXT, INSTRUCTION, PREAMBLE]
    if dataset == "all":
        frames += [*B.BIO_QUESTIONS.values(), B.BIO_BACKWARD]
        frames += [f for group in B.BIO_FRAMES for f in group]
        for same, perm in B.ARTICLE_SENTENCES:
            frames += list(same) + list(perm)
        frames += [q for row in B.ARTICLE_QAS for q in (row[0], row[3])]
        pools += [B.MONTHS, bank.cities, bank.colleges, bank.majors, bank.employers, bank.article_features,
                  bank.article_events, bank.article_kinds, [k.title() for k in bank.article_kinds]]
        texts.append("He She The It Its")
        texts.append(" ".join(str(i) for i in [*range(1, 32), *range(1800, 2031)]))
    elif dataset != "NameDescription":
        raise ValueError(f"unknown dataset {dataset!r}")
    texts += [_SLOT.sub(" ", f) for f in frames]
    texts += [" ".join(p) for p in pools]
    return texts


def bank_vocab(bank: TemplateBank = DEFAULT_BANK, dataset: str = "all") -> Vocab:
    return build_vocab(bank_texts(bank, dataset))


@dataclass
class Corpora:
    knowledge: list[FactRecord]  # fine-tuning facts
    generic: list[FactRecord]  # pretraining distractors, disjoint entities
    generic_qa: int  # generic[:generic_qa] also get QA examples in pretraining


def make_corpora(n_each: int, generic_each: int, paras: int, seed: int, bank: TemplateBank = DEFAULT_BANK,
                 generic_qa_frac: float = 0.5) -> Corpora:
    knowledge = gen_name_description_set(n_each, paras, bank, seed)
    generic = gen_name_description_set(generic_each, paras, bank, seed + 7919,
                                       exclude=record_entities(knowledge), id_prefix="gen-")
    # interleave N2D and D2N so the QA-bearing prefix covers both kinds
    half = len(generic) // 2
    generic = [r for pair in zip(generic[:half], generic[half:]) for r in pair]
    return Corpora(knowledge, generic, int(round(generic_qa_frac * len(generic))))


def fresh_statements(n: int, seed: int, exclude: set[str], bank: TemplateBank = DEFAULT_BANK) -> list[str]:
    """``n`` newly drawn N2D/D2N statements avoiding the ``exclude`` entities."""
    recs = gen_name_description_set((n + 1) // 2, 0, bank, seed, exclude=exclude)
    return [r.original for r in recs[:n]]


# --------------------------------------------------------------------------
# training examples
#
# causal examples: (ids, span) with span marking target positions
# diffusion examples: (ids, maskable)


@dataclass
class Example:
    ids: np.ndarray
    flags: np.ndarray  # loss span (causal) or maskable set (diffusion)


def doc_ids(text: str, vocab: Vocab) -> list[int]:
    return encode(text, vocab)


def causal_doc(text: str, vocab: Vocab) -> Example:
    ids = np.array([vocab.bos_id] + encode(text, vocab) + [vocab.eot_id], dtype=np.int64)
    span = np.ones(len(ids), bool)
    span[0] = False
    return Example(ids, span)


def causal_qa(question: str, answer: str, vocab: Vocab) -> Example:
    q = [vocab.bos_id] + encode(question, vocab)
    a = encode(answer, vocab) + [vocab.eot_id]
    span = np.r_[np.zeros(len(q), bool), np.ones(len(a), bool)]
    return Example(np.array(q + a, dtype=np.int64), span)


def chat_qa(question: str, answer: str, vocab: Vocab) -> Example:
    r = render_chat([ChatTurn("user", question), ChatTurn("assistant", answer)], vocab)
    ids = np.array([vocab.bos_id] + r.ids, dtype=np.int64)
    s, e = r.spans[1]
    span = np.zeros(len(ids), bool)
    span[1 + s : 1 + e + 1] = True
    return Example(ids, span)


def chat_recovery(text: str, policy: MaskPolicy, vocab: Vocab, rng: np.random.Generator,
                  t: float | None = None) -> Example:
    ex = build_masked_sft(encode(text, vocab), policy, vocab, rng, t=t)
    return Example(ex.full, ex.loss_span)


def diffusion_doc(text: str, vocab: Vocab) -> Example:
    ids = np.array([vocab.bos_id] + encode(text, vocab) + [vocab.eot_id], dtype=np.int64)
    maskable = np.ones(len(ids), bool)
    maskable[0] = False
    return Example(ids, maskable)


def diffusion_qa(question: str, answer: str, vocab: Vocab, gen_length: int) -> Example:
    """Question then the answer padded with EOT to the decoder's answer region."""
    q = [vocab.bos_id] + encode(question, vocab)
    a = encode(answer, vocab) + [vocab.eot_id]
    if len(a) > gen_length:
        raise ValueError(f"answer of {len(a)} tokens does not fit gen_length {gen_length}")
    a += [vocab.eot_id] * (gen_length - len(a))
    flags = np.r_[np.zeros(len(q), bool), np.ones(len(a), bool)]
    return Example(np.array(q + a, dtype=np.int64), flags)


def diffusion_corrupt(exs: Sequence[Example], policy: MaskPolicy, vocab: Vocab, rng: np.random.Generator):
    return [corrupt_nonempty(e.ids, e.flags, sample_t(policy, rng), policy, rng, vocab.mask_id) for e in exs]


def qa_answer(rec: FactRecord) -> str:
    """Training-time answer text for a QA: the fact's original statement."""
    return rec.original
