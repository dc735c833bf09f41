import numpy as np
import pytest

from rnn_surgery._kernels import ParamLayout, loss_and_grad, numba_enabled
from rnn_surgery.regression.erm import net_to_params, params_to_net
from rnn_surgery.regression import predict_last
from _factories import fd_gradient_errors


@pytest.mark.parametrize("d_x,W,L", [(1, 3, 1), (2, 5, 2), (3, 4, 3)])
def test_backends_agree(d_x, W, L):
    rng = np.random.default_rng(W * L)
    layout = ParamLayout(d_x, W, L)
    theta = rng.normal(size=layout.size) * 0.5
    X = rng.uniform(size=(64, 4, d_x))
    y = rng.normal(size=64)
    la, ga = loss_and_grad(layout, theta, X, y, 0.8, backend="numpy")
    lb, gb = loss_and_grad(layout, theta, X, y, 0.8, backend="numba")
    assert la == pytest.approx(lb, rel=1e-12)
    assert np.max(np.abs(ga - gb)) <= 1e-12 * max(1.0, np.abs(ga).max())


def test_loss_matches_network_evaluation():
    rng = np.random.default_rng(1)
    layout = ParamLayout(2, 4, 2)
    theta = rng.normal(size=layout.size)
    X = rng.uniform(size=(50, 3, 2))
    y = rng.normal(size=50)
    net = params_to_net(layout, theta, 0.7)
    pred = predict_last(net, X.transpose(0, 2, 1))
    for backend in ("numpy", "numba"):
        assert loss_and_grad(layout, theta, X, y, 0.7, want_grad=False, backend=backend)[0] == pytest.approx(np.mean((pred - y) ** 2), rel=1e-12)


def test_param_round_trip():
    rng = np.random.default_rng(2)
    layout = ParamLayout(3, 4, 2)
    theta = rng.normal(size=layout.size)
    lay2, theta2 = net_to_params(params_to_net(layout, theta, 1.0))
    assert lay2 == layout and np.array_equal(theta, theta2)


@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_gradients_match_finite_differences(backend):
    rng = np.random.default_rng(3)
    layout = ParamLayout(2, 4, 2)
    X = rng.uniform(size=(30, 3, 2))
    y = rng.normal(size=30)
    assert np.max(fd_gradient_errors(rng, layout, X, y, K=0.9, backend=backend)) <= 1e-5


def test_env_flag(monkeypatch):
    monkeypatch.setenv("RNN_SURGERY_NUMBA", "0")
    assert not numba_enabled()
    with pytest.raises(ValueError):
        loss_and_grad(ParamLayout(1, 1, 1), np.zeros(5), np.zeros((2, 1, 1)), np.zeros(2), 1.0, backend="cuda")
