"""Empirical risk minimization over clipped RNNs read out at the last step."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .._kernels import ParamLayout, loss_and_grad
from ..networks import RecurrentLayer, RecurrentNet

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    """Every restart produced a non-finite loss."""

    def __init__(self, message: str, restart_log: list | None = None):
        super().__init__(message)
        self.restart_log = restart_log or []


@dataclass(frozen=True)
class TrainConfig:
    width: int = 8
    depth: int = 1
    clip: float | None = None  # None: use the task bound K
    learning_rate: float = 0.05
    epochs: int = 500
    restarts: int = 2
    val_fraction: float = 0.2
    seed: int = 0
    optimizer: str = "gd"  # "gd" (backtracking gradient descent) or "lbfgs"
    tol: float = 1e-10

    def __post_init__(self):
        if min(self.width, self.depth, self.epochs, self.restarts) < 1:
            raise ValueError("width, depth, epochs and restarts must be at least 1")
        if not self.learning_rate > 0 or (self.clip is not None and not self.clip > 0):
            raise ValueError("clip and learning_rate must be positive")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")
        if self.optimizer not in ("gd", "lbfgs"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class ERMResult:
    net: RecurrentNet
    train_trace: list
    val_loss: float
    best_restart: int
    restart_log: list = field(default_factory=list)


def init_params(layout: ParamLayout, rng: np.random.Generator) -> np.ndarray:
    """He-scaled input maps, small recurrent weights, slightly positive biases."""
    W, d_x = layout.W, layout.d_x
    P = rng.normal(0.0, np.sqrt(2.0 / d_x), (W, d_x))
    A = [rng.normal(0.0, 0.3 / np.sqrt(W), (W, W)) for _ in range(layout.L)]
    B = [rng.normal(0.0, np.sqrt(2.0 / W), (W, W)) for _ in range(layout.L)]
    c = [np.full(W, 0.01) for _ in range(layout.L)]
    Q = rng.normal(0.0, 1.0 / np.sqrt(W), W)
    return layout.pack(P, A, B, c, Q)


def params_to_net(layout: ParamLayout, theta, K: float) -> RecurrentNet:
    P, A, B, c, Q = layout.split(np.asarray(theta, dtype=np.float64))
    layers = tuple(RecurrentLayer(a, b, cc) for a, b, cc in zip(A, B, c))
    return RecurrentNet(P, layers, Q[None, :], output_clip=K)


def net_to_params(net: RecurrentNet) -> tuple[ParamLayout, np.ndarray]:
    layout = ParamLayout(net.input_dim, net.width, net.depth)
    return layout, layout.pack(net.embed, [l.A for l in net.layers], [l.B for l in net.layers],
                               [l.c for l in net.layers], net.project[0])


def _gd(layout, theta, X, y, cfg: TrainConfig):
    """Full-batch gradient descent; a step is accepted only if the loss does not rise,
    otherwise the step size halves. Accepted steps grow it by 1.2x."""
    lr = cfg.learning_rate
    loss, g = loss_and_grad(layout, theta, X, y, cfg.clip)
    trace = [loss]
    if not np.isfinite(loss):
        return theta, trace
    for _ in range(cfg.epochs):
        for _ in range(40):
            trial = theta - lr * g
            t_loss, _ = loss_and_grad(layout, trial, X, y, cfg.clip, want_grad=False)
            if np.isfinite(t_loss) and t_loss <= loss:
                break
            lr *= 0.5
        else:
            break
        improvement = loss - t_loss
        theta = trial
        loss, g = loss_and_grad(layout, theta, X, y, cfg.clip)
        trace.append(loss)
        lr *= 1.2
        if improvement <= cfg.tol * max(loss, 1e-12):
            break
    return theta, trace


def _lbfgs(layout, theta, X, y, cfg: TrainConfig):
    from scipy.optimize import minimize

    trace = []

    def fun(th):
        return loss_and_grad(layout, th, X, y, cfg.clip)

    trace.append(fun(theta)[0])

    def record(th):
        trace.append(loss_and_grad(layout, th, X, y, cfg.clip, want_grad=False)[0])

    res = minimize(fun, theta, jac=True, method="L-BFGS-B", callback=record,
                   options={"maxiter": cfg.epochs, "ftol": cfg.tol, "gtol": 1e-12})
    return res.x, trace


def _validation_split(M: int, val_fraction: float) -> int:
    n_val = int(round(M * val_fraction))
    if val_fraction > 0:
        n_val = max(1, n_val)
    return M - n_val


def train_erm_detailed(task, data, cfg: TrainConfig) -> ERMResult:
    """Fit on ``data = (windows, y)`` with windows ``(M, d_x, N)`` and responses ``(M,)``.

    The first ``1 - val_fraction`` of the windows (in time order) are used for
    training; the restart with the lowest loss on the rest is returned.
    """
    windows, y = data
    windows = np.asarray(windows, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if cfg.clip is None:
        cfg = replace(cfg, clip=float(task.K))
    M = windows.shape[0]
    if M < 10:
        raise ValueError("need at least 10 windows")
    if y.shape[0] != M:
        raise ValueError("windows and responses differ in count")
    X = np.ascontiguousarray(windows.transpose(0, 2, 1))
    split = _validation_split(M, cfg.val_fraction)
    Xtr, ytr, Xva, yva = X[:split], y[:split], X[split:], y[split:]
    layout = ParamLayout(X.shape[2], cfg.width, cfg.depth)
    optimize = _gd if cfg.optimizer == "gd" else _lbfgs
    best = None
    restart_log = []
    for k in range(cfg.restarts):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, k]))
        theta, trace = optimize(layout, init_params(layout, rng), Xtr, ytr, cfg)
        if len(Xva):
            val = loss_and_grad(layout, theta, Xva, yva, cfg.clip, want_grad=False)[0]
        else:
            val = trace[-1]
        ok = bool(np.isfinite(trace[-1]) and np.isfinite(val))
        restart_log.append({"restart": k, "train_loss": trace[-1], "val_loss": val, "steps": len(trace) - 1, "finite": ok})
        log.debug("restart %d: train %.3g val %.3g (%d steps)", k, trace[-1], val, len(trace) - 1)
        if ok and (best is None or val < best[0]):
            best = (val, k, theta, trace)
    if best is None:
        raise TrainingDivergedError("all restarts diverged; try a smaller learning rate", restart_log)
    val, k, theta, trace = best
    return ERMResult(params_to_net(layout, theta, cfg.clip), trace, val, k, restart_log)


def train_erm(task, data, cfg: TrainConfig) -> RecurrentNet:
    """Clipped RNN minimizing the sliding-window squared loss (see :func:`train_erm_detailed`)."""
    return train_erm_detailed(task, data, cfg).net


def predict_last(net: RecurrentNet, windows) -> np.ndarray:
    """Scalar prediction at the last step of each window ``(M, d_x, N)``."""
    from ..networks import eval_rnn

    return eval_rnn(net, windows)[:, 0, -1]
