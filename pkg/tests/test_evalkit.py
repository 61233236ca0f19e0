import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskft.datagen import gen_name_description_set
from maskft.decode import DecodeCfg
from maskft.evalkit import (
    EvalReport, FitError, aggregate, append_csv, best_checkpoint, evaluate, fit_convergence, normalize, read_csv,
    rouge1,
)


def test_rouge_examples():
    assert rouge1("Paris", "Paris") == 1.0
    assert rouge1("The capital is Paris.", "paris") == 1.0
    assert rouge1("Lyon", "Paris") == 0.0
    assert rouge1("a b b", "a a b") == pytest.approx(2 / 3)
    assert rouge1("", "x y") == 0.0
    assert rouge1("x", "x y") == 0.5


def test_rouge_normalization():
    assert normalize("Hello, World!  it's") == ["hello", "world", "it", "s"]
    with pytest.raises(ValueError):
        rouge1("x", "...")


words = st.lists(st.sampled_from(["a", "b", "c", "d", "e"]), min_size=0, max_size=8).map(" ".join)


@settings(max_examples=200, deadline=None)
@given(words, words.filter(bool))
def test_rouge_bounds(gen, gold):
    s = rouge1(gen, gold)
    assert 0.0 <= s <= 1.0
    assert rouge1(gen + " " + gold, gold) == 1.0
    assert rouge1(gen.upper(), gold) == s


def test_aggregate_macro_mean():
    rep = aggregate(5, [("N2D", "forward", 1.0), ("N2D", "forward", 0.0), ("N2D", "backward", 0.0),
                        ("D2N", "forward", 1.0), ("D2N", "backward", 1.0)])
    assert rep.per_category["N2D-fwd"] == 0.5
    assert rep.forward == pytest.approx(0.75)
    assert rep.backward == pytest.approx(0.5)
    assert rep.total == pytest.approx(0.625)


def test_evaluate_with_oracle_and_failures():
    corpus = gen_name_description_set(4, 1, seed=0)
    gold = {q.question: q.answer for r in corpus for q in r.qas}
    rep = evaluate(None, corpus, "AR", None, DecodeCfg(), responder=lambda qs: [gold[q] for q in qs])
    assert rep.total == 1.0 and rep.forward == 1.0 and rep.backward == 1.0
    rep = evaluate(None, corpus, "AR", None, DecodeCfg(), responder=lambda qs: [""] * len(qs))
    assert rep.total == 0.0

    def flaky(qs):
        if len(qs) > 1:
            raise ValueError("batch too large")
        if "Which" in qs[0] or "Who is the" in qs[0]:
            raise ValueError("bad item")
        return [gold[qs[0]]]
    rep = evaluate(None, corpus, "AR", None, DecodeCfg(), responder=flaky)
    assert 0.0 <= rep.total <= 1.0 and len(rep.items) == 16


def test_best_checkpoint_ties():
    reps = [EvalReport(s, {}, t) for s, t in [(0, 0.1), (20, 0.5), (40, 0.5), (60, 0.2)]]
    assert best_checkpoint(reps).step == 20
    with pytest.raises(ValueError):
        best_checkpoint([])


def test_csv_roundtrip(tmp_path):
    path = tmp_path / "m.csv"
    for step in (0, 20):
        append_csv(aggregate(step, [("N2D", "forward", 0.25), ("N2D", "backward", 0.5)]), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,category,accuracy,total"
    assert lines[1] == "0,N2D-fwd,0.250000,0.375000"
    reps = read_csv(path)
    assert [r.step for r in reps] == [0, 20] and reps[1].per_category["Bwd"] == 0.5
    with pytest.raises(FileNotFoundError):
        read_csv(tmp_path / "missing.csv")


def _curve(A, k, steps, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    y = A * (1 - np.exp(-k * steps)) + noise * rng.standard_normal(len(steps))
    return list(zip(steps, y))


STEPS20 = np.arange(1, 21, dtype=float) * 20


def test_fit_noiseless_exact():
    fit = fit_convergence(_curve(0.9, 0.01, STEPS20))
    assert abs(fit.A - 0.9) < 1e-6 and abs(fit.k - 0.01) < 1e-6
    assert not fit.degenerate


def test_fit_noisy_fixed_draw():
    fit = fit_convergence(_curve(0.9, 0.01, STEPS20, 0.02, 0))
    assert abs(fit.A - 0.9) / 0.9 < 0.05 and abs(fit.k - 0.01) / 0.01 < 0.05


def test_fit_noisy_distribution():
    # k is the weakly identified parameter; most noise draws still land within 5%
    errs = []
    for seed in range(100):
        fit = fit_convergence(_curve(0.9, 0.01, STEPS20, 0.02, seed))
        errs.append((abs(fit.A - 0.9) / 0.9, abs(fit.k - 0.01) / 0.01))
    errs = np.array(errs)
    assert errs[:, 0].max() < 0.05
    assert np.mean(errs[:, 1] < 0.05) > 0.7


def test_fit_degenerate_and_errors():
    steps = np.arange(0, 200, 20, dtype=float)
    assert fit_convergence(list(zip(steps, np.zeros(len(steps))))).degenerate
    with pytest.raises(ValueError):
        fit_convergence([(0, 0), (1, 1)])
    with pytest.raises(ValueError):
        fit_convergence([(0, 0), (2, 1), (1, 1), (3, 1)])
    with pytest.raises(FitError) as ei:
        fit_convergence(_curve(0.5, 0.003, steps, 0.1, 1), max_iter=1)
    assert ei.value.best.A >= 0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 1.0), st.floats(0.002, 0.05))
def test_fit_recovers_grid(A, k):
    steps = np.arange(0, 1001, 20, dtype=float)
    fit = fit_convergence(_curve(A, k, steps))
    assert fit.A == pytest.approx(A, rel=1e-5) and fit.k == pytest.approx(k, rel=1e-5)
