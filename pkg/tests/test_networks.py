import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rnn_surgery import (
    DimensionError,
    FeedforwardNet,
    ModifiedRecurrentNet,
    RecurrentLayer,
    RecurrentNet,
    eval_fnn,
    eval_mrnn,
    eval_rnn,
    vec,
)
from _factories import loop_eval_rnn, random_fnn, random_rnn, scalar_rnn


def test_fnn_single_affine_layer():
    net = FeedforwardNet((([[1.0]], [-0.5]),))
    assert eval_fnn(net, [2.0]).tolist() == [1.5]
    assert net.depth == 1 and net.width == 0


def test_fnn_relu_kills_negative():
    net = FeedforwardNet((([[1.0]], [0.0]), ([[1.0]], [0.0])))
    assert eval_fnn(net, [-1.0]).tolist() == [0.0]


def test_fnn_matches_straight_line_evaluation():
    rng = np.random.default_rng(0)
    net = random_fnn(rng, [4, 6, 5, 2])
    xs = rng.normal(size=(100, 4))
    for x in xs:
        h = list(x)
        for li, (A, b) in enumerate(net.layers):
            h = [sum(A[i, j] * h[j] for j in range(len(h))) + b[i] for i in range(A.shape[0])]
            if li < net.depth - 1:
                h = [max(v, 0.0) for v in h]
        assert np.max(np.abs(eval_fnn(net, x) - h)) <= 1e-12
    assert np.allclose(eval_fnn(net, xs)[7], eval_fnn(net, xs[7]), rtol=0, atol=1e-14)


def test_fnn_shape_errors():
    with pytest.raises(DimensionError):
        FeedforwardNet((([[1.0, 2.0]], [0.0]), ([[1.0, 1.0]], [0.0])))
    net = FeedforwardNet((([[1.0, 2.0]], [0.0]),))
    with pytest.raises(DimensionError):
        eval_fnn(net, [1.0])


def test_identity_rnn_example():
    assert np.allclose(eval_rnn(scalar_rnn(0.0, 1.0), [[0.3, 0.7]]), [[0.3, 0.7]], atol=0)


def test_cumsum_rnn_example():
    out = eval_rnn(scalar_rnn(1.0, 1.0), [[0.1, 0.2, 0.3]])
    assert np.allclose(out, [[0.1, 0.3, 0.6]], atol=1e-15)


def test_zero_initial_state():
    out = eval_rnn(scalar_rnn(5.0, 1.0), [[0.2, 0.1]])
    assert np.allclose(out, [[0.2, 1.1]], atol=1e-15)


def test_rnn_matches_loop_oracle_and_batches():
    rng = np.random.default_rng(1)
    net = random_rnn(rng, 2, 4, 3, d_y=2)
    X = rng.uniform(-1, 1, size=(5, 2, 6))
    batch = eval_rnn(net, X)
    for b in range(5):
        assert np.max(np.abs(batch[b] - loop_eval_rnn(net, X[b]))) <= 1e-12
        assert np.allclose(batch[b], eval_rnn(net, X[b]), rtol=0, atol=1e-14)


def test_rnn_dimension_errors():
    net = scalar_rnn(0.0, 1.0)
    with pytest.raises(DimensionError):
        eval_rnn(net, np.zeros((2, 3)))
    with pytest.raises(DimensionError):
        RecurrentNet(np.zeros((2, 1)), (RecurrentLayer(np.eye(3), np.eye(3), np.zeros(3)),), np.zeros((1, 3)))


def test_output_clip_bounds_outputs():
    rng = np.random.default_rng(2)
    net = random_rnn(rng, 1, 3, 2, clip=0.25)
    out = eval_rnn(net, rng.uniform(-10, 10, size=(50, 1, 4)))
    assert np.all(np.abs(out) <= 0.25)


def test_mrnn_linear_unit():
    layer = RecurrentLayer(np.zeros((2, 2)), np.zeros((2, 2)), [-1.0, -1.0])
    net = ModifiedRecurrentNet.from_index_sets(np.zeros((2, 1)), [layer], np.eye(2), [[0]])
    assert eval_mrnn(net, [[0.0]])[:, 0].tolist() == [0.0, -1.0]


def test_full_mask_mrnn_equals_rnn():
    rng = np.random.default_rng(3)
    for _ in range(100):
        net = random_rnn(rng, 2, 3, 2)
        m = ModifiedRecurrentNet(net.embed, net.layers, net.project, tuple(np.ones(3, bool) for _ in range(2)))
        X = rng.uniform(size=(2, 4))
        assert np.max(np.abs(eval_mrnn(m, X) - eval_rnn(net, X))) <= 1e-12


def test_empty_mask_is_linear_recurrence():
    rng = np.random.default_rng(4)
    net = random_rnn(rng, 2, 3, 1)
    m = ModifiedRecurrentNet(net.embed, net.layers, net.project, (np.zeros(3, bool),))
    X = rng.uniform(-1, 1, size=(2, 5))
    layer = net.layers[0]
    h = np.zeros(3)
    for t in range(5):
        h = layer.A @ h + layer.B @ (net.embed @ X[:, t]) + layer.c
        assert np.max(np.abs(eval_mrnn(m, X)[:, t] - net.project @ h)) <= 1e-12
    assert np.max(np.abs(eval_mrnn(m, X) - loop_eval_rnn(net, X, [np.zeros(3, bool)]))) <= 1e-12


def test_vec_stacks_columns():
    X = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    assert vec(X).tolist() == [1.0, 4.0, 2.0, 5.0, 3.0, 6.0]
    assert vec(X[None]).tolist() == [vec(X).tolist()]


def test_weights_are_immutable():
    net = scalar_rnn(1.0, 1.0)
    with pytest.raises(ValueError):
        net.layers[0].A[0, 0] = 3.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t=st.integers(1, 5), N=st.integers(5, 8))
def test_causality(seed, t, N):
    rng = np.random.default_rng(seed)
    net = random_rnn(rng, 2, 3, 2, d_y=2)
    X1 = rng.uniform(-2, 2, size=(2, N))
    X2 = X1.copy()
    X2[:, t:] = rng.uniform(-2, 2, size=(2, N - t))
    assert np.array_equal(eval_rnn(net, X1)[:, :t], eval_rnn(net, X2)[:, :t])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_determinism_bitwise(seed):
    rng = np.random.default_rng(seed)
    net = random_rnn(rng, 1, 4, 2)
    X = rng.uniform(size=(3, 1, 5))
    assert np.array_equal(eval_rnn(net, X), eval_rnn(net, X.copy()))
