import numpy as np
import pytest

from maskft import numcore as nc
from maskft.model import AttnMode, ModelConfig, forward, init_params, param_shapes

CFG = ModelConfig(vocab_size=13, n_layers=2, n_heads=2, d_model=16, max_len=12)


@pytest.fixture(scope="module")
def params():
    return init_params(CFG, seed=3, dtype=np.float64)


def test_output_shape(params):
    for L in (1, 5, CFG.max_len):
        ids = np.arange(L) % CFG.vocab_size
        assert forward(ids, AttnMode.CAUSAL, params).shape == (L, CFG.vocab_size)


def test_too_long_rejected(params):
    with pytest.raises(ValueError):
        forward(np.zeros(CFG.max_len + 1, int), AttnMode.CAUSAL, params)


def test_causality_every_position(params):
    rng = np.random.default_rng(0)
    ids = rng.integers(0, CFG.vocab_size, 10)
    base = forward(ids, AttnMode.CAUSAL, params).data
    for p in range(10):
        pert = ids.copy()
        pert[p] = (pert[p] + 1) % CFG.vocab_size
        out = forward(pert, AttnMode.CAUSAL, params).data
        np.testing.assert_array_equal(out[:p], base[:p])
        assert not np.array_equal(out[p:], base[p:])


def test_bidirectional_sees_future(params):
    ids = np.array([1, 2, 3, 4, 5])
    a = forward(ids, AttnMode.BIDIRECTIONAL, params).data
    ids2 = ids.copy()
    ids2[-1] = 6
    b = forward(ids2, AttnMode.BIDIRECTIONAL, params).data
    assert not np.allclose(a[0], b[0])


def test_modes_agree_at_length_one(params):
    ids = np.array([4])
    np.testing.assert_array_equal(
        forward(ids, AttnMode.CAUSAL, params).data, forward(ids, AttnMode.BIDIRECTIONAL, params).data
    )


def test_padding_does_not_leak(params):
    ids = np.array([[1, 2, 3, 0, 0], [1, 2, 3, 7, 8]])
    valid = np.array([[1, 1, 1, 0, 0], [1, 1, 1, 1, 1]], bool)
    out = forward(ids, AttnMode.BIDIRECTIONAL, params, valid).data
    solo = forward(np.array([1, 2, 3]), AttnMode.BIDIRECTIONAL, params).data
    np.testing.assert_allclose(out[0, :3], solo, atol=1e-12)


def test_init_scales():
    p = init_params(ModelConfig(vocab_size=50, n_layers=4, d_model=64, n_heads=4), seed=0)
    assert list(p.tensors) == list(param_shapes(p.config))
    assert p["tok_emb"].data.std() == pytest.approx(0.02, rel=0.1)
    assert p["h0.attn.proj"].data.std() == pytest.approx(0.02 / np.sqrt(8), rel=0.1)
    assert p["tok_emb"].dtype == np.float32


def test_init_deterministic():
    a, b = init_params(CFG, 5), init_params(CFG, 5)
    for n in a.names():
        np.testing.assert_array_equal(a[n].data, b[n].data)


def test_lm_head_untied(params):
    assert "lm_head" in params.tensors and params["lm_head"].shape == (CFG.d_model, CFG.vocab_size)


def test_two_layer_composite_gradient():
    from gradcheck import rel_err

    p = init_params(ModelConfig(vocab_size=7, n_layers=2, n_heads=2, d_model=8, max_len=6), 1, np.float64)
    ids = np.array([[1, 3, 5, 2], [0, 6, 6, 1]])
    tgt = np.array([[3, 5, 2, 4], [6, 6, 1, 0]])

    def loss_val():
        per, _ = nc.cross_entropy(forward(ids, AttnMode.CAUSAL, p), tgt)
        return float(per.data.sum())

    with nc.GradTape() as tape:
        per, _ = nc.cross_entropy(forward(ids, AttnMode.CAUSAL, p), tgt)
        tape.backward(nc.sum_all(per))
    rng = np.random.default_rng(0)
    for name in p.names():
        t = p[name]
        idx = [tuple(rng.integers(0, s) for s in t.shape) for _ in range(3)]
        for i in idx:
            old = t.data[i]
            t.data[i] = old + 1e-5
            fp = loss_val()
            t.data[i] = old - 1e-5
            fm = loss_val()
            t.data[i] = old
            num = (fp - fm) / 2e-5
            assert abs(num - t.grad[i]) <= 1e-4 * max(abs(num), abs(t.grad[i]), 1e-3), name
