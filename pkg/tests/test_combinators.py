import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rnn_surgery import DimensionError, compose, concat, eval_fnn, eval_rnn, identity_rnn, lincomb, pad, tokenwise_rnn
from rnn_surgery.combinators import InvalidTargetError
from _factories import random_fnn, random_rnn, scalar_rnn

IDENTITY = scalar_rnn(0.0, 1.0)
CUMSUM = scalar_rnn(1.0, 1.0)
DOUBLE = scalar_rnn(0.0, 1.0, q=2.0)


def test_pad_identity_example():
    net = pad(IDENTITY, 4, 3)
    assert (net.width, net.depth) == (4, 3)
    assert np.allclose(eval_rnn(net, [[0.3, 0.7]]), [[0.3, 0.7]], rtol=0, atol=0)


def test_pad_random_net():
    rng = np.random.default_rng(0)
    net = random_rnn(rng, 1, 2, 1)
    big = pad(net, 5, 4)
    X = rng.uniform(size=(200, 1, 6))
    assert np.max(np.abs(eval_rnn(big, X) - eval_rnn(net, X))) <= 1e-12


def test_pad_noop_keeps_weights():
    rng = np.random.default_rng(1)
    net = random_rnn(rng, 2, 3, 2)
    same = pad(net, 3, 2)
    assert np.array_equal(same.embed, net.embed) and np.array_equal(same.project, net.project)
    for a, b in zip(same.layers, net.layers):
        assert np.array_equal(a.A, b.A) and np.array_equal(a.B, b.B) and np.array_equal(a.c, b.c)


def test_pad_rejects_shrinking():
    with pytest.raises(InvalidTargetError):
        pad(pad(IDENTITY, 3, 2), 2, 2)


def test_compose_identity():
    net = compose(IDENTITY, IDENTITY)
    assert net.depth == 2
    assert np.allclose(eval_rnn(net, [[0.25, 0.5]]), [[0.25, 0.5]], rtol=0, atol=0)


def test_compose_scale_after_cumsum():
    assert np.allclose(eval_rnn(compose(DOUBLE, CUMSUM), [[0.1, 0.2]]), [[0.2, 0.6]], rtol=0, atol=1e-15)


def test_compose_dimension_mismatch():
    rng = np.random.default_rng(2)
    with pytest.raises(DimensionError):
        compose(random_rnn(rng, 2, 2, 1), random_rnn(rng, 1, 2, 1, d_y=3))


def test_concat_identity():
    out = eval_rnn(concat(IDENTITY, IDENTITY), [[0.5]])
    assert out[:, 0].tolist() == [0.5, 0.5]


def test_lincomb_examples():
    assert eval_rnn(lincomb(2.0, IDENTITY, 3.0, IDENTITY), [[0.1]])[0, 0] == pytest.approx(0.5, abs=1e-15)
    rng = np.random.default_rng(3)
    net = random_rnn(rng, 2, 3, 2)
    X = rng.uniform(size=(100, 2, 4))
    assert np.max(np.abs(eval_rnn(lincomb(1.0, net, -1.0, net), X))) <= 1e-12


def test_concat_input_mismatch():
    rng = np.random.default_rng(4)
    with pytest.raises(DimensionError):
        concat(random_rnn(rng, 1, 2, 1), random_rnn(rng, 2, 2, 1))
    with pytest.raises(DimensionError):
        lincomb(1.0, random_rnn(rng, 1, 2, 1, d_y=2), 1.0, random_rnn(rng, 1, 2, 1))


def test_identity_rnn_exact_on_signed_inputs():
    X = np.random.default_rng(5).normal(size=(3, 7)) * 100
    assert np.array_equal(eval_rnn(identity_rnn(3), X), X)


def test_tokenwise_rnn_applies_fnn_per_token():
    rng = np.random.default_rng(6)
    fnn = random_fnn(rng, [2, 5, 4, 3])
    net = tokenwise_rnn(fnn)
    X = rng.normal(size=(2, 6))
    assert net.depth == fnn.depth - 1
    assert np.max(np.abs(eval_rnn(net, X) - eval_fnn(fnn, X.T).T)) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    w1=st.integers(1, 5), w2=st.integers(1, 5), l1=st.integers(1, 3), l2=st.integers(1, 3),
    c1=st.floats(-3, 3), c2=st.floats(-3, 3),
)
def test_combinators_match_definitions(seed, w1, w2, l1, l2, c1, c2):
    rng = np.random.default_rng(seed)
    n1 = random_rnn(rng, 2, w1, l1, d_y=2)
    n2 = random_rnn(rng, 2, w2, l2, d_y=2)
    X = rng.uniform(size=(20, 2, 5))
    y1, y2 = eval_rnn(n1, X), eval_rnn(n2, X)

    p = pad(n1, w1 + 2, l1 + 1)
    assert (p.width, p.depth) == (w1 + 2, l1 + 1)
    assert np.max(np.abs(eval_rnn(p, X) - y1)) <= 1e-10

    cm = compose(n2, n1)
    assert (cm.width, cm.depth) == (max(w1, w2), l1 + l2)
    assert np.max(np.abs(eval_rnn(cm, X) - eval_rnn(n2, y1))) <= 1e-10

    cc = concat(n1, n2)
    assert (cc.width, cc.depth) == (w1 + w2, max(l1, l2))
    assert np.max(np.abs(eval_rnn(cc, X) - np.concatenate([y1, y2], axis=1))) <= 1e-10

    lc = lincomb(c1, n1, c2, n2)
    assert (lc.width, lc.depth) == (w1 + w2, max(l1, l2))
    assert np.max(np.abs(eval_rnn(lc, X) - (c1 * y1 + c2 * y2))) <= 1e-10
