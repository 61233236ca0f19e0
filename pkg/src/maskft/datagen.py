"""Deterministic synthetic knowledge corpora with paraphrases and styled QAs.

Three dataset families are produced from a :class:`~maskft.bank.TemplateBank`:

* NameDescription: one-sentence statements in name-first (N2D) or
  description-first (D2N) order, with same-order paraphrases.
* Biography: six-sentence profiles where only the first sentence names the
  person.
* Article: short multi-fact passages with same-order and permute-order
  paraphrases.

Everything is a pure function of ``(bank, seed, n)``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import bank as B
from .bank import DEFAULT_BANK, TemplateBank

FORWARD = "forward"
BACKWARD = "backward"
KINDS = ("N2D", "D2N", "Bio", "Article")


class CorpusError(ValueError):
    pass


@dataclass
class QAPair:
    question: str
    answer: str
    cues: list[str]
    style: str


@dataclass
class FactRecord:
    id: str
    kind: str
    original: str
    same_order_paras: list[str] = field(default_factory=list)
    permute_order_paras: list[str] = field(default_factory=list)
    qas: list[QAPair] = field(default_factory=list)

    def passages(self, usage: str = "none") -> list[str]:
        """Training passages: the original plus the requested paraphrase set."""
        if usage == "none":
            return [self.original]
        if usage == "same_order":
            return [self.original] + self.same_order_paras
        if usage == "permute_order":
            return [self.original] + self.permute_order_paras
        raise ValueError(f"unknown paraphrase usage {usage!r}")


# --------------------------------------------------------------------------
# style classification


def classify_style(q: QAPair, original: str) -> str:
    """Forward iff the answer is stated after every cue has been introduced.

    Matching is case-insensitive. Each cue contributes its first occurrence;
    the answer contributes its last, so an answer repeated after the cues
    (as in a lead sentence followed by details) counts as forward.
    """
    text = original.lower()
    a = text.rfind(q.answer.lower())
    if a < 0:
        raise CorpusError(f"answer {q.answer!r} not found in passage")
    last_cue = -1
    for c in q.cues:
        p = text.find(c.lower())
        if p < 0:
            raise CorpusError(f"cue {c!r} not found in passage")
        last_cue = max(last_cue, p)
    return FORWARD if last_cue < a else BACKWARD


def info_order(text: str, keys: Iterable[str]) -> list[str]:
    """Keys sorted by first occurrence in ``text`` (absent keys dropped)."""
    found = [(text.find(k), k) for k in dict.fromkeys(keys)]
    return [k for p, k in sorted(found) if p >= 0]


# --------------------------------------------------------------------------
# entity sampling


def _draw_distinct(rng, pool, n, what):
    if n > len(pool):
        raise CorpusError(f"need {n} distinct {what}, pool has {len(pool)}")
    return [pool[i] for i in rng.permutation(len(pool))[:n]]


def _people(rng, bank: TemplateBank, n: int, exclude: set[str], middle: bool = False) -> list[str]:
    """``n`` unique names; parts are distinct within the set when pools allow."""
    firsts, lasts = bank.first_names, bank.last_names
    if n <= min(len(firsts), len(lasts)):
        for _ in range(100):
            fs = _draw_distinct(rng, firsts, n, "first names")
            ls = _draw_distinct(rng, lasts, n, "last names")
            if middle:
                ms = [firsts[i] for i in rng.integers(0, len(firsts), n)]
                names = [f"{f} {m} {l}" for f, m, l in zip(fs, ms, ls)]
            else:
                names = [f"{f} {l}" for f, l in zip(fs, ls)]
            if not exclude.intersection(names):
                return names
        raise CorpusError("could not draw names disjoint from the exclusion set")
    capacity = len(firsts) * len(lasts) - len(exclude)
    if n > capacity:
        raise CorpusError(f"name pool exhausted: need {n}, {capacity} available")
    names: list[str] = []
    seen = set(exclude)
    while len(names) < n:
        f = firsts[rng.integers(len(firsts))]
        l = lasts[rng.integers(len(lasts))]
        name = f"{f} {firsts[rng.integers(len(firsts))]} {l}" if middle else f"{f} {l}"
        if name not in seen:
            seen.add(name)
            names.append(name)
    return names


def _titles(rng, bank: TemplateBank, n: int, exclude: set[str]) -> list[str]:
    adj, noun = bank.title_adj, bank.title_noun
    if n <= min(len(adj), len(noun)):
        for _ in range(100):
            titles = [f"{a} {b}" for a, b in zip(_draw_distinct(rng, adj, n, "adjectives"),
                                                 _draw_distinct(rng, noun, n, "nouns"))]
            if not exclude.intersection(titles):
                return titles
        raise CorpusError("could not draw titles disjoint from the exclusion set")
    capacity = len(adj) * len(noun) - len(exclude)
    if n > capacity:
        raise CorpusError(f"title pool exhausted: need {n}, {capacity} available")
    out: list[str] = []
    seen = set(exclude)
    while len(out) < n:
        t = f"{adj[rng.integers(len(adj))]} {noun[rng.integers(len(noun))]}"
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def _cap(s: str) -> str:
    return s[:1].upper() + s[1:]


# --------------------------------------------------------------------------
# NameDescription


def _nd_paraphrases(kind: str, name: str, desc: str, k: int, rng) -> list[str]:
    if kind == "N2D":
        combos = [(p, v, s) for p in B.N2D_PREFIXES for v in B.N2D_VERBS for s in B.N2D_SUFFIXES]
        render = lambda p, v, s: _cap(f"{p}{name} {v} the {desc}{s}.")  # noqa: E731
    else:
        combos = [(p, v, s) for p in B.D2N_PREFIXES for v in B.D2N_VERBS for s in B.D2N_SUFFIXES]
        render = lambda p, v, s: _cap(f"{p}the {desc} {v} {name}{s}.")  # noqa: E731
    # drop the frame that reproduces the original sentence
    combos = [c for c in combos if c != ("", "is", "")]
    if k > len(combos):
        raise CorpusError(f"at most {len(combos)} paraphrases available, asked for {k}")
    order = rng.permutation(len(combos))[:k]
    return [render(*combos[i]) for i in order]


def _nd_record(kind: str, idx: int, name: str, desc: str, paras: int, rng, prefix: str) -> FactRecord:
    original = B.N2D_ORIGINAL.format(n=name, d=desc) if kind == "N2D" else B.D2N_ORIGINAL.format(n=name, d=desc)
    ask_desc = B.ASK_DESC[int(rng.integers(len(B.ASK_DESC)))].format(n=name)
    ask_name = B.ASK_NAME[int(rng.integers(len(B.ASK_NAME)))].format(d=desc)
    # name -> description is forward for N2D and backward for D2N
    q_desc = QAPair(ask_desc, desc, [name], FORWARD if kind == "N2D" else BACKWARD)
    q_name = QAPair(ask_name, name, [desc], BACKWARD if kind == "N2D" else FORWARD)
    rec = FactRecord(
        id=f"{prefix}{kind.lower()}-{idx:04d}",
        kind=kind,
        original=original,
        same_order_paras=_nd_paraphrases(kind, name, desc, paras, rng),
        qas=[q_desc, q_name],
    )
    return rec


def gen_name_description(
    n: int,
    kind: str,
    paras_per_fact: int = 30,
    bank: TemplateBank = DEFAULT_BANK,
    seed: int = 0,
    exclude: Iterable[str] = (),
    id_prefix: str = "",
) -> list[FactRecord]:
    """``n`` statements of one kind (``N2D`` or ``D2N``).

    ``exclude`` lists names and titles that must not be reused, which is how
    distractor corpora are kept disjoint from a knowledge corpus.
    """
    if kind not in ("N2D", "D2N"):
        raise ValueError(f"kind must be N2D or D2N, got {kind!r}")
    rng = np.random.default_rng([seed, 0 if kind == "N2D" else 1])
    exclude = set(exclude)
    names = _people(rng, bank, n, exclude)
    titles = _titles(rng, bank, n, exclude)
    roles = [bank.roles[i] for i in rng.integers(0, len(bank.roles), n)]
    return [
        _nd_record(kind, i, name, f"{title} {role}", paras_per_fact, rng, id_prefix)
        for i, (name, title, role) in enumerate(zip(names, titles, roles))
    ]


def gen_name_description_set(
    n_each: int, paras_per_fact: int = 30, bank: TemplateBank = DEFAULT_BANK, seed: int = 0,
    exclude: Iterable[str] = (), id_prefix: str = "",
) -> list[FactRecord]:
    """N2D and D2N halves drawn jointly so no name or title is shared."""
    rng = np.random.default_rng([seed, 2])
    exclude = set(exclude)
    names = _people(rng, bank, 2 * n_each, exclude)
    titles = _titles(rng, bank, 2 * n_each, exclude)
    roles = [bank.roles[i] for i in rng.integers(0, len(bank.roles), 2 * n_each)]
    out = []
    for i in range(2 * n_each):
        kind = "N2D" if i < n_each else "D2N"
        out.append(_nd_record(kind, i % n_each, names[i], f"{titles[i]} {roles[i]}", paras_per_fact, rng, id_prefix))
    return out


def record_entities(records: Iterable[FactRecord]) -> set[str]:
    """Names and titles used by a NameDescription corpus (for ``exclude``)."""
    out = set()
    for r in records:
        if r.kind in ("N2D", "D2N"):
            # first QA is name -> description, cued by the name
            name, desc = r.qas[0].cues[0], r.qas[0].answer
            out.add(name)
            out.add(" ".join(desc.split()[:2]))
    return out


# --------------------------------------------------------------------------
# Biography


def gen_biography(
    n: int,
    paras_per_fact: int = 5,
    bank: TemplateBank = DEFAULT_BANK,
    seed: int = 0,
    exclude: Iterable[str] = (),
    id_prefix: str = "",
) -> list[FactRecord]:
    rng = np.random.default_rng([seed, 3])
    names = _people(rng, bank, n, set(exclude), middle=True)
    out = []
    n_syn = min(len(f) for f in B.BIO_FRAMES)
    if paras_per_fact > n_syn ** len(B.BIO_FRAMES) - 1:
        raise CorpusError("not enough biography frames for the requested paraphrases")
    for i, name in enumerate(names):
        month = B.MONTHS[int(rng.integers(12))]
        birthday = f"{month} {int(rng.integers(1, 29))}, {int(rng.integers(1940, 2005))}"
        city, wcity = _draw_distinct(rng, bank.cities, 2, "cities")
        college = bank.colleges[int(rng.integers(len(bank.colleges)))]
        major = bank.majors[int(rng.integers(len(bank.majors)))]
        employer = bank.employers[int(rng.integers(len(bank.employers)))]
        pron = "He" if rng.random() < 0.5 else "She"
        slots = dict(n=name, P=pron, birthday=birthday, city=city, college=college,
                     major=major, employer=employer, wcity=wcity)

        def render(choice):
            return " ".join(B.BIO_FRAMES[s][c].format(**slots) for s, c in enumerate(choice))

        original = render((0,) * len(B.BIO_FRAMES))
        seen = {(0,) * len(B.BIO_FRAMES)}
        paras = []
        while len(paras) < paras_per_fact:
            choice = tuple(int(c) for c in rng.integers(0, n_syn, len(B.BIO_FRAMES)))
            if choice not in seen:
                seen.add(choice)
                paras.append(render(choice))
        qas = [QAPair(B.BIO_QUESTIONS[k].format(n=name), slots[k], [name], FORWARD) for k in B.BIO_QUESTIONS]
        qas.append(QAPair(B.BIO_BACKWARD.format(**slots), name, [city, major, employer], BACKWARD))
        out.append(FactRecord(f"{id_prefix}bio-{i:04d}", "Bio", original, paras, [], qas))
    return out


# --------------------------------------------------------------------------
# Article


def gen_article(
    n: int,
    bank: TemplateBank = DEFAULT_BANK,
    seed: int = 0,
    n_same: int = 10,
    n_permute: int = 10,
    id_prefix: str = "",
) -> list[FactRecord]:
    rng = np.random.default_rng([seed, 4])
    titles = _titles(rng, bank, n, set())
    founders = _people(rng, bank, n, set())
    out = []
    for i in range(n):
        kind = bank.article_kinds[int(rng.integers(len(bank.article_kinds)))]
        slots = dict(
            e=f"{titles[i]} {kind.title()}",
            kind=kind,
            city=bank.cities[int(rng.integers(len(bank.cities)))],
            year=str(int(rng.integers(1820, 1990))),
            founder=founders[i],
            feature=bank.article_features[int(rng.integers(len(bank.article_features)))],
            year2=str(int(rng.integers(2000, 2025))),
            event=bank.article_events[int(rng.integers(len(bank.article_events)))],
        )
        sents = B.ARTICLE_SENTENCES
        original = " ".join(s[0][0].format(**slots) for s in sents)

        same, seen = [], {original}
        while len(same) < n_same:
            text = " ".join(s[0][int(rng.integers(len(s[0])))].format(**slots) for s in sents)
            if text not in seen:
                seen.add(text)
                same.append(text)
            elif len(seen) >= np.prod([len(s[0]) for s in sents]):
                raise CorpusError("same-order frame pool exhausted")

        permute = []
        while len(permute) < n_permute:
            flips = rng.random(len(sents)) < 0.5
            if not flips.any():
                flips[int(rng.integers(len(sents)))] = True
            parts = []
            for s, flip in zip(sents, flips):
                variants = s[1] if flip else s[0]
                parts.append(variants[int(rng.integers(len(variants)))].format(**slots))
            tail = [parts[j] for j in 1 + rng.permutation(len(parts) - 1)]
            text = " ".join([parts[0]] + tail)
            if text not in seen:
                seen.add(text)
                permute.append(text)

        qas = []
        for fq, ak, cks, rq, rak, rcks in B.ARTICLE_QAS:
            for question, ans_key, cue_keys in ((fq, ak, cks), (rq, rak, rcks)):
                q = QAPair(question.format(**slots), slots[ans_key], [slots[c] for c in cue_keys], "")
                q.style = classify_style(q, original)
                qas.append(q)
        out.append(FactRecord(f"{id_prefix}article-{i:04d}", "Article", original, same, permute, qas))
    return out


# --------------------------------------------------------------------------
# corpus files


def record_to_json(rec: FactRecord) -> str:
    obj = {
        "id": rec.id,
        "kind": rec.kind,
        "original": rec.original,
        "same_order_paras": rec.same_order_paras,
        "permute_order_paras": rec.permute_order_paras,
        "qas": [
            {"question": q.question, "answer": q.answer, "cues": q.cues, "style": q.style}
            for q in rec.qas
        ],
    }
    return json.dumps(obj, ensure_ascii=False)


def record_from_obj(obj: dict) -> FactRecord:
    qas = [QAPair(q["question"], q["answer"], list(q["cues"]), q["style"]) for q in obj["qas"]]
    for q in qas:
        if q.style not in (FORWARD, BACKWARD):
            raise ValueError(f"bad style {q.style!r}")
    if obj["kind"] not in KINDS:
        raise ValueError(f"bad kind {obj['kind']!r}")
    return FactRecord(
        obj["id"], obj["kind"], obj["original"],
        list(obj["same_order_paras"]), list(obj["permute_order_paras"]), qas,
    )


def write_corpus(records: Iterable[FactRecord], path: str | Path) -> None:
    lines = [record_to_json(r) + "\n" for r in records]
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_corpus(path: str | Path) -> list[FactRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(record_from_obj(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}:{n}: malformed record ({exc})") from exc
    return out


def records_equal(a: FactRecord, b: FactRecord) -> bool:
    return asdict(a) == asdict(b)
