import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskft.bank import DEFAULT_BANK, TemplateBank
from maskft.datagen import (
    BACKWARD, FORWARD, CorpusError, QAPair, classify_style, gen_article, gen_biography, gen_name_description,
    gen_name_description_set, info_order, read_corpus, record_entities, records_equal, write_corpus,
)


def test_name_description_scale():
    recs = gen_name_description(30, "N2D", 30, seed=0)
    assert len(recs) == 30
    assert sum(len(r.same_order_paras) for r in recs) == 900
    assert sum(len(r.qas) for r in recs) == 60


def test_name_description_styles():
    (n2d,) = gen_name_description(1, "N2D", 3)
    (d2n,) = gen_name_description(1, "D2N", 3)
    assert [q.style for q in n2d.qas] == [FORWARD, BACKWARD]
    assert [q.style for q in d2n.qas] == [BACKWARD, FORWARD]
    for r in (n2d, d2n):
        for q in r.qas:
            assert classify_style(q, r.original) == q.style


def test_determinism(tmp_path):
    a = gen_name_description_set(10, 5, seed=3)
    b = gen_name_description_set(10, 5, seed=3)
    write_corpus(a, tmp_path / "a.jsonl")
    write_corpus(b, tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert gen_name_description_set(10, 5, seed=4)[0].original != a[0].original


def test_set_has_distinct_parts():
    recs = gen_name_description_set(10, 2, seed=0)
    names = [r.qas[0].cues[0] for r in recs]
    descs = [r.qas[0].answer for r in recs]
    for parts in (lambda n: n.split()[0], lambda n: n.split()[1]):
        assert len({parts(n) for n in names}) == 20
    for parts in (lambda d: d.split()[0], lambda d: d.split()[1]):
        assert len({parts(d) for d in descs}) == 20


def test_exclusion_keeps_corpora_disjoint():
    k = gen_name_description_set(10, 2, seed=0)
    g = gen_name_description_set(50, 2, seed=1, exclude=record_entities(k))
    assert not record_entities(k) & record_entities(g)


def test_pool_exhaustion():
    small = TemplateBank(first_names=("A", "B"), last_names=("C",))
    with pytest.raises(CorpusError):
        gen_name_description(3, "N2D", 1, bank=small)
    with pytest.raises(CorpusError):
        gen_name_description(1, "N2D", 500)
    with pytest.raises(ValueError):
        gen_name_description(1, "X2Y", 1)


def test_biography():
    recs = gen_biography(100, 5, seed=0)
    assert len(recs) == 100 and all(len(r.same_order_paras) == 5 for r in recs)
    for r in recs[:20]:
        name = r.qas[0].cues[0]
        for text in [r.original] + r.same_order_paras:
            sents = text.split(". ")
            assert len(sents) == 6 or text.count(".") >= 6
            assert text.startswith(name)
            assert text.count(name) == 1
        back = [q for q in r.qas if q.style == BACKWARD]
        assert len(back) == 1 and all(c in r.original for c in back[0].cues)
        assert classify_style(back[0], r.original) == BACKWARD


def test_article():
    recs = gen_article(15, seed=0)
    for r in recs:
        assert len(r.same_order_paras) == 10 and len(r.permute_order_paras) == 10
        qs = r.qas
        assert len(qs) % 2 == 0
        for fwd, rev in zip(qs[::2], qs[1::2]):
            assert rev.answer in fwd.cues
            assert fwd.answer in rev.question or fwd.answer in rev.cues
            assert fwd.style == FORWARD and rev.style == BACKWARD


def test_permute_moves_location_clause():
    recs = gen_article(5, seed=1)
    assert any(p.find(r.qas[0].answer) < p.find(r.qas[1].answer) for r in recs for p in r.permute_order_paras)
    for r in recs:
        for p in r.same_order_paras:
            assert p.find(r.qas[1].answer) < p.find(r.qas[0].answer)


def _pairs(rec):
    keys = []
    for q in rec.qas:
        keys += q.cues + [q.answer]
    return keys


@pytest.mark.parametrize("gen", [lambda: gen_name_description_set(10, 10, seed=0),
                                 lambda: gen_biography(10, 5, seed=0), lambda: gen_article(10, seed=0)])
def test_fact_consistency_and_order(gen):
    for r in gen():
        answers = {q.answer for q in r.qas}
        keys = _pairs(r)
        base = info_order(r.original, keys)
        for p in r.same_order_paras + r.permute_order_paras:
            for a in answers:
                assert a in p
        for p in r.same_order_paras:
            assert info_order(p, keys) == base
        if r.permute_order_paras:
            assert any(info_order(p, keys) != base for p in r.permute_order_paras)
        for q in r.qas:
            assert classify_style(q, r.original) == q.style


def test_classify_style_cases():
    assert classify_style(QAPair("?", "B", ["A"], ""), "A is B") == FORWARD
    assert classify_style(QAPair("?", "A", ["B"], ""), "A is B") == BACKWARD
    with pytest.raises(CorpusError):
        classify_style(QAPair("?", "C", ["A"], ""), "A is B")
    with pytest.raises(CorpusError):
        classify_style(QAPair("?", "A", ["C"], ""), "A is B")


def test_worked_example_styles():
    passage = ("Mitchell Saron (December 6, 2000) is an American right-handed sabre fencer. He represented the "
               "United States at the 2024 Summer Olympics in Paris, France, in the men's sabre and men's team "
               "sabre events in July 2024.")
    q1 = QAPair("Which weapon category ...?", "Sabre", ["Mitchell Saron", "United States", "2024 Summer Olympics"], "")
    q2 = QAPair("Who represented ...?", "Mitchell Saron", ["Sabre", "United States", "2024 Summer Olympics"], "")
    assert classify_style(q1, passage) == FORWARD
    assert classify_style(q2, passage) == BACKWARD


def test_corpus_roundtrip(tmp_path):
    recs = gen_name_description_set(3, 2) + gen_biography(2, 1) + gen_article(2)
    write_corpus(recs, tmp_path / "c.jsonl")
    back = read_corpus(tmp_path / "c.jsonl")
    assert all(records_equal(a, b) for a, b in zip(recs, back)) and len(back) == len(recs)
    write_corpus([], tmp_path / "e.jsonl")
    assert (tmp_path / "e.jsonl").read_bytes() == b""
    first = json.loads((tmp_path / "c.jsonl").read_text().splitlines()[0])
    assert list(first) == ["id", "kind", "original", "same_order_paras", "permute_order_paras", "qas"]


def test_corrupted_line_reports_line(tmp_path):
    recs = gen_name_description_set(2, 1)
    write_corpus(recs, tmp_path / "c.jsonl")
    lines = (tmp_path / "c.jsonl").read_text().splitlines()
    lines[2] = lines[2][:-5]
    (tmp_path / "c.jsonl").write_text("\n".join(lines) + "\n")
    with pytest.raises(CorpusError, match=r"c\.jsonl:3"):
        read_corpus(tmp_path / "c.jsonl")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12))
def test_generated_qas_always_classifiable(seed, n):
    for r in gen_name_description_set(n, 2, seed=seed) + gen_article(2, seed=seed):
        for q in r.qas:
            assert classify_style(q, r.original) == q.style


def test_bank_pools_unique():
    for pool in (DEFAULT_BANK.first_names, DEFAULT_BANK.last_names, DEFAULT_BANK.title_adj,
                 DEFAULT_BANK.title_noun, DEFAULT_BANK.roles, DEFAULT_BANK.cities):
        assert len(set(pool)) == len(pool)
