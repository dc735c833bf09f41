"""Simultaneous approximation of a sequence of past-dependent targets by one RNN.

For each step ``t`` a piecewise-linear interpolation FNN of ``f^(t)`` is turned
into an RNN, clipped to ``[-K, K]``, multiplied by the step indicator
``1{t = t0}`` through a ReLU product network, and the ``N`` resulting nets are
summed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .combinators import compose, concat, lincomb, tokenwise_rnn
from .conversion import TimeIndexError, fnn_to_rnn
from .networks import DimensionError, FeedforwardNet, RecurrentLayer, RecurrentNet, eval_fnn, eval_rnn

MAX_GRID_POINTS = 10**7


class GridTooLargeError(ValueError):
    """Requested evaluation grid exceeds :data:`MAX_GRID_POINTS`."""


@dataclass(frozen=True)
class PastDependentTarget:
    """``f^(t)``: a function of the first ``t`` tokens, vectorized over rows of ``vec(x[1:t])``."""

    t: int
    fn: Callable[[np.ndarray], np.ndarray]
    beta: float = 1.0
    K: float = 1.0
    d_x: int = 1
    d_y: int = 1

    def __post_init__(self):
        if self.t < 1:
            raise TimeIndexError("t must be at least 1")
        if not (self.beta > 0 and self.K > 0):
            raise ValueError("beta and K must be positive")

    @property
    def input_dim(self) -> int:
        return self.d_x * self.t

    def __call__(self, Z) -> np.ndarray:
        """Evaluate on ``(M, d_x t)`` rows; returns ``(M, d_y)``."""
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        out = np.asarray(self.fn(Z), dtype=np.float64)
        return out.reshape(Z.shape[0], self.d_y)

    def check_bound(self, points_per_axis: int = 5) -> bool:
        """Spot-check ``|f| <= K`` on a tensor grid."""
        return bool(np.all(np.abs(self(_tensor_grid(self.input_dim, points_per_axis))) <= self.K))


@dataclass(frozen=True)
class ApproxBudget:
    """Product-network budget: ``J`` grid pieces per level and ``I_d`` refinement levels."""

    J: int = 4
    I_d: int = 3

    def __post_init__(self):
        if self.J < 1 or self.I_d < 1:
            raise ValueError("J and I_d must be at least 1")


def _tensor_grid(d: int, m: int) -> np.ndarray:
    if m ** d > MAX_GRID_POINTS:
        raise GridTooLargeError(f"{m}^{d} grid points exceed the cap of {MAX_GRID_POINTS}; use a coarser grid")
    axis = np.linspace(0.0, 1.0, m)
    return np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)


# ---------------------------------------------------------------------------
# exact building blocks
# ---------------------------------------------------------------------------


def indicator_rnn(t0: int, N: int, d_x: int) -> RecurrentNet:
    """Width 3, depth 2 net whose output at step ``t`` is exactly ``1{t = t0}``.

    Layer 1 counts steps; layer 2 forms ``relu(t-t0+1) - 2 relu(t-t0) + relu(t-t0-1)``.
    """
    if not 1 <= t0 <= N:
        raise TimeIndexError(f"need 1 <= t0 <= N, got t0={t0}, N={N}")
    A1 = np.zeros((3, 3))
    A1[0, 0] = 1.0
    B2 = np.zeros((3, 3))
    B2[:, 0] = 1.0
    layers = (
        RecurrentLayer(A1, np.zeros((3, 3)), np.array([1.0, 0.0, 0.0])),
        RecurrentLayer(np.zeros((3, 3)), B2, np.array([1.0 - t0, -t0, -t0 - 1.0])),
    )
    return RecurrentNet(np.zeros((3, d_x)), layers, np.array([[1.0, -2.0, 1.0]]))


def trunc_net(K: float, d_y: int = 1) -> RecurrentNet:
    """Token-wise clip to ``[-K, K]`` as ``relu(x) - relu(-x) - relu(x-K) + relu(-x-K)``.

    Inside ``[-K, K]`` the output is bit-identical to the input; saturated
    values are exact whenever ``x -+ K`` is (e.g. ``|x| <= 2K``).
    """
    if not K > 0:
        raise ValueError("K must be positive")
    I = np.eye(d_y)
    P = np.vstack([I, -I, I, -I])
    W = 4 * d_y
    c = np.concatenate([np.zeros(2 * d_y), np.full(2 * d_y, -float(K))])
    layer = RecurrentLayer(np.zeros((W, W)), np.eye(W), c)
    return RecurrentNet(P, (layer,), np.hstack([I, -I, -I, I]))


# ---------------------------------------------------------------------------
# product network
# ---------------------------------------------------------------------------


def _zigzag_coeffs(J: int) -> np.ndarray:
    """``Z(y) = sum_k z_k relu(y - k/J)``: J-piece zigzag mapping [0, 1] onto itself."""
    z = np.empty(J)
    z[0] = J
    z[1:] = [2.0 * J * (-1) ** k for k in range(1, J)]
    return z


def _bump_coeffs(J: int) -> np.ndarray:
    """``phi(y) = sum_k p_k relu(y - k/J)``: interpolant of ``y (1 - y)`` at the nodes ``k/J``."""
    g = np.array([(k / J) * (1 - k / J) for k in range(J + 1)])
    slopes = np.diff(g) * J
    return np.diff(np.concatenate([[0.0], slopes]))


def square_fnn_layers(J: int, levels: int):
    """Per-level weights for the squaring scheme on ``[0, 1]``.

    ``acc_0 = x``, ``acc_s = acc_{s-1} - J^{-2(s-1)} phi(Z^{s-1}(x))``; ``acc_m``
    interpolates ``x^2`` on the grid of spacing ``J^{-m}``, error at most ``J^{-2m}/4``.
    """
    return _zigzag_coeffs(J), _bump_coeffs(J), [J ** (-2.0 * s) for s in range(levels)]


def product_error_bound(K: float, budget: ApproxBudget) -> float:
    """Sup-error bound of :func:`product_fnn` on ``[-K, K] x [0, 1]``."""
    return 1.5 * K * budget.J ** (-2.0 * budget.I_d)


def product_fnn(K: float, budget: ApproxBudget, d_y: int = 1) -> FeedforwardNet:
    """FNN approximating ``(u, v) -> u v`` element-wise for ``u in [-K, K]^{d_y}``, ``v in [0, 1]``.

    With ``a = (u + K) / 2K``: ``a v = 2 ((a+v)/2)^2 - a^2/2 - v^2/2`` and
    ``u v = 2K a v - K v``. Each of the ``2 d_y + 1`` squares runs the zigzag
    refinement scheme; ``v`` is carried alongside.
    """
    J, m = budget.J, budget.I_d
    z, p, scale = square_fnn_layers(J, m)
    knots = np.arange(J) / J
    n_sq = 2 * d_y + 1
    S = J + 1  # per square: J knot units then the accumulator
    width = n_sq * S + 1
    d_in = d_y + 1

    # square arguments as affine maps of the input (u, v)
    arg_A = np.zeros((n_sq, d_in))
    arg_b = np.zeros(n_sq)
    for j in range(d_y):
        arg_A[j, j] = 1 / (2 * K)  # a_j
        arg_b[j] = 0.5
        arg_A[d_y + j, j] = 1 / (4 * K)  # (a_j + v) / 2
        arg_A[d_y + j, d_y] = 0.5
        arg_b[d_y + j] = 0.25
    arg_A[2 * d_y, d_y] = 1.0  # v

    A = np.zeros((width, d_in))
    b = np.zeros(width)
    for q in range(n_sq):
        o = q * S
        A[o : o + J] = arg_A[q]
        b[o : o + J] = arg_b[q] - knots
        A[o + J] = arg_A[q]
        b[o + J] = arg_b[q]
    A[-1, d_y] = 1.0
    layers = [(A, b)]

    for s in range(1, m):
        A = np.zeros((width, width))
        b = np.zeros(width)
        for q in range(n_sq):
            o = q * S
            A[o : o + J, o : o + J] = z  # every knot unit reads Z(y_s)
            b[o : o + J] = -knots
            A[o + J, o : o + J] = -scale[s - 1] * p
            A[o + J, o + J] = 1.0
        A[-1, -1] = 1.0
        layers.append((A, b))

    # read-out: finish the last level, then combine the squares
    sq = np.zeros((n_sq, width))
    for q in range(n_sq):
        o = q * S
        sq[q, o : o + J] = -scale[m - 1] * p
        sq[q, o + J] = 1.0
    mix = np.zeros((d_y, n_sq))
    for j in range(d_y):
        mix[j, j] = -0.5 * 2 * K
        mix[j, d_y + j] = 2.0 * 2 * K
        mix[j, 2 * d_y] = -0.5 * 2 * K
    out = mix @ sq
    out[:, -1] -= K
    layers.append((out, np.zeros(d_y)))
    return FeedforwardNet(tuple(layers))


def product_net(K: float, budget: ApproxBudget, d_y: int = 1) -> RecurrentNet:
    """Token-wise RNN form of :func:`product_fnn`; input tokens are ``(u, v)``."""
    return tokenwise_rnn(product_fnn(K, budget, d_y))


def product_grid_error(K: float, budget: ApproxBudget, points: int = 101) -> float:
    """Sup-error of the scalar product net over a ``points x points`` grid of ``[-K, K] x [0, 1]``."""
    u = np.linspace(-K, K, points)
    v = np.linspace(0.0, 1.0, points)
    U, V = np.meshgrid(u, v, indexing="ij")
    Z = np.stack([U.ravel(), V.ravel()], axis=1)
    return float(np.abs(eval_fnn(product_fnn(K, budget, 1), Z)[:, 0] - Z[:, 0] * Z[:, 1]).max())


# ---------------------------------------------------------------------------
# piecewise-linear interpolation FNN
# ---------------------------------------------------------------------------


def _pl_1d(vals: np.ndarray, r: int) -> FeedforwardNet:
    """``f(0) + sum_k (s_k - s_{k-1}) relu(x - k/r)`` interpolating ``vals`` (``(r+1, d_y)``) at ``k/r``."""
    slopes = np.diff(vals, axis=0) * r
    jumps = np.diff(np.vstack([np.zeros((1, vals.shape[1])), slopes]), axis=0)
    keep = np.flatnonzero(np.any(jumps != 0, axis=1))
    if keep.size == 0:
        keep = np.array([0])
    A1 = np.ones((keep.size, 1))
    b1 = -keep / r
    return FeedforwardNet(((A1, b1), (jumps[keep].T, vals[0].copy())))


class _LayerBuilder:
    """Accumulates rows of one ReLU layer as linear forms over the previous layer's units."""

    def __init__(self, n_prev: int):
        self.n_prev = n_prev
        self.rows: list[np.ndarray] = []
        self.bias: list[float] = []

    def unit(self, form, const: float = 0.0) -> int:
        self.rows.append(np.asarray(form, dtype=np.float64))
        self.bias.append(float(const))
        return len(self.rows) - 1

    def build(self):
        return np.array(self.rows).reshape(len(self.rows), self.n_prev), np.array(self.bias)


def _pl_simplex(nodes: np.ndarray, vals: np.ndarray, r: int, max_width: int) -> FeedforwardNet:
    """Sum of Freudenthal hat functions ``relu(1 - max(0, y) + min(0, y))``, ``y = r x - k``.

    Exact on ``[0, 1]^d``. Running max/min over the ``d`` coordinates take one
    layer each, so nodes are processed in batches of ``(max_width - d - 2 d_y) // 4``
    with the hat layer of one batch sharing a layer with the start of the next.
    Signed partial sums are carried as separate nonnegative accumulators.
    """
    n, d = nodes.shape
    d_y = vals.shape[1]
    per_batch = max(1, (max_width - d - 2 * d_y) // 4)
    batches = [range(i, min(i + per_batch, n)) for i in range(0, n, per_batch)]

    def e(i, size):
        v = np.zeros(size)
        v[i] = 1.0
        return v

    layers = []
    size = d
    x_forms = [(e(i, d), 0.0) for i in range(d)]
    pos = [(np.zeros(d), 0.0) for _ in range(d_y)]
    neg = [(np.zeros(d), 0.0) for _ in range(d_y)]
    pending: list[tuple[int, np.ndarray]] = []  # (hat unit index, node values)
    run: dict[int, tuple] = {}  # node -> (M form, n form) over previous layer
    schedule = [(b, s) for b in range(len(batches)) for s in range(d)] + [(len(batches), 0)]

    for batch_idx, stage in schedule:
        lb = _LayerBuilder(size)
        new_x = [lb.unit(f, c) for f, c in x_forms]
        new_pos, new_neg = [], []
        for j in range(d_y):
            fp, cp = pos[j]
            fn, cn = neg[j]
            fp, fn = fp.copy(), fn.copy()
            for h, v in pending:
                fp[h] += max(v[j], 0.0)
                fn[h] += max(-v[j], 0.0)
            new_pos.append(lb.unit(fp, cp))
            new_neg.append(lb.unit(fn, cn))
        new_run = {}
        new_pending = []
        # hats for the batch that just finished its last stage
        if stage == 0 and batch_idx > 0:
            for node in batches[batch_idx - 1]:
                (fM, cM), (fN, cN) = run[node]
                h = lb.unit(-fM - fN, 1.0 - cM - cN)
                new_pending.append((h, vals[node]))
        if batch_idx < len(batches):
            for node in batches[batch_idx]:
                k = nodes[node]
                yf, yc = r * x_forms[stage][0], r * x_forms[stage][1] - k[stage]
                if stage == 0:
                    uM = lb.unit(yf, yc)
                    uN = lb.unit(-yf, -yc)
                    new_run[node] = ((uM, None), (uN, None))
                else:
                    (fM, cM), (fN, cN) = run[node]
                    uM = lb.unit(fM, cM)
                    uA = lb.unit(yf - fM, yc - cM)
                    uN = lb.unit(fN, cN)
                    uB = lb.unit(-yf - fN, -yc - cN)
                    new_run[node] = ((uM, uA), (uN, uB))
        A, b = lb.build()
        layers.append((A, b))
        size = A.shape[0]
        x_forms = [(e(i, size), 0.0) for i in new_x]
        pos = [(e(i, size), 0.0) for i in new_pos]
        neg = [(e(i, size), 0.0) for i in new_neg]
        pending = new_pending
        run = {}
        for node, ((uM, uA), (uN, uB)) in new_run.items():
            fM = e(uM, size) + (e(uA, size) if uA is not None else 0.0)
            fN = e(uN, size) + (e(uB, size) if uB is not None else 0.0)
            run[node] = ((fM, 0.0), (fN, 0.0))

    out = np.zeros((d_y, size))
    for j in range(d_y):
        out[j] = pos[j][0] - neg[j][0]
        for h, v in pending:
            out[j, h] += v[j]
    layers.append((out, np.zeros(d_y)))
    return FeedforwardNet(tuple(layers))


def freudenthal_interpolate(values_fn, r: int, Z: np.ndarray) -> np.ndarray:
    """Reference evaluation of the same interpolant directly (sort-based barycentrics)."""
    Z = np.atleast_2d(Z)
    M, d = Z.shape
    y = np.clip(Z * r, 0, r)
    base = np.minimum(np.floor(y), r - 1)
    frac = y - base
    order = np.argsort(-frac, axis=1, kind="stable")
    sorted_frac = np.take_along_axis(frac, order, axis=1)
    weights = np.concatenate([1 - sorted_frac[:, :1], -np.diff(sorted_frac, axis=1), sorted_frac[:, -1:]], axis=1)
    vertex = base.copy()
    total = weights[:, :1] * values_fn(vertex / r)
    for i in range(d):
        vertex[np.arange(M), order[:, i]] += 1
        total = total + weights[:, i + 1 : i + 2] * values_fn(vertex / r)
    return total


def holder_error_bound(target: PastDependentTarget, resolution: int) -> float:
    """``K d h^{min(beta, 1)}`` with ``h = 1/resolution``."""
    return target.K * target.input_dim * (1.0 / resolution) ** min(target.beta, 1.0)


def _eval_points_per_axis(d: int, resolution: int, cap: int = 200_000) -> int:
    m = 4 * resolution + 3
    while m > 2 and m ** d > cap:
        m -= 1
    return m


def holder_fnn(target: PastDependentTarget, resolution: int, t0: int | None = None, N: int | None = None,
               max_width: int = 64, points_per_axis: int | None = None) -> tuple[FeedforwardNet, float]:
    """Piecewise-linear interpolation FNN of ``target`` on the uniform grid of spacing ``1/resolution``.

    Returns ``(net, measured sup-error)`` over a tensor grid that is not
    aligned with the interpolation nodes. Nodes where the target vanishes
    contribute no units.
    """
    if resolution < 1:
        raise ValueError("resolution must be at least 1")
    t0 = target.t if t0 is None else t0
    if t0 != target.t:
        raise TimeIndexError(f"target depends on {target.t} tokens, asked for t0={t0}")
    if N is not None and not 1 <= t0 <= N:
        raise TimeIndexError(f"need 1 <= t0 <= N, got t0={t0}, N={N}")
    d = target.input_dim
    r = resolution
    if (r + 1) ** d > MAX_GRID_POINTS:
        raise GridTooLargeError(f"{(r + 1) ** d} interpolation nodes exceed the cap")
    nodes = np.array(list(itertools.product(range(r + 1), repeat=d)), dtype=np.int64)
    vals = target(nodes / r)
    if d == 1:
        net = _pl_1d(vals, r)
    else:
        keep = np.any(vals != 0, axis=1)
        if not keep.any():
            keep[0] = True
        net = _pl_simplex(nodes[keep], vals[keep], r, max_width)
    m = points_per_axis or _eval_points_per_axis(d, r)
    Z = _tensor_grid(d, m)
    err = float(np.abs(eval_fnn(net, Z) - target(Z)).max())
    return net, err


# ---------------------------------------------------------------------------
# assembly and measurement
# ---------------------------------------------------------------------------


@dataclass
class AssemblyReport:
    net: RecurrentNet
    fnn_errors: list = field(default_factory=list)
    product_bound: float = 0.0


def assemble_sequence_approximator(targets, budget: ApproxBudget, resolution: int,
                                   max_width: int = 64, report: bool = False):
    """One RNN whose output at every step ``t`` approximates ``targets[t-1]``.

    Per step: interpolation FNN, exact FNN-to-RNN conversion, clip at ``K``,
    stack with the step indicator, multiply, then sum over steps.
    """
    targets = list(targets)
    if not targets:
        raise ValueError("need at least one target")
    N = len(targets)
    d_x, d_y, K = targets[0].d_x, targets[0].d_y, targets[0].K
    for i, tgt in enumerate(targets, start=1):
        if (tgt.d_x, tgt.d_y, tgt.K) != (d_x, d_y, K):
            raise DimensionError("targets must share d_x, d_y and K")
        if tgt.t != i:
            raise TimeIndexError(f"target {i} declares t={tgt.t}")
    prod = product_net(K, budget, d_y)
    clip = trunc_net(K, d_y)
    total = None
    errors = []
    for tgt in targets:
        fnn, err = holder_fnn(tgt, resolution, tgt.t, N, max_width=max_width)
        errors.append(err)
        step = compose(clip, fnn_to_rnn(fnn, tgt.t, N, d_x))
        gated = compose(prod, concat(step, indicator_rnn(tgt.t, N, d_x)))
        total = gated if total is None else lincomb(1.0, total, 1.0, gated)
    if report:
        return AssemblyReport(total, errors, N * product_error_bound(K, budget))
    return total


def sup_error_on_grid(net: RecurrentNet, target: PastDependentTarget, points_per_axis: int, N: int | None = None) -> float:
    """``max ||net(X)[t] - f(x[1:t])||_inf`` over a tensor grid of ``[0, 1]^{d_x t}``.

    Tokens after ``t`` are irrelevant by causality and set to zero.
    """
    if N is not None and target.t > N:
        raise TimeIndexError(f"target step {target.t} exceeds N={N}")
    d, t = target.input_dim, target.t
    Z = _tensor_grid(d, points_per_axis)
    worst = 0.0
    for chunk in np.array_split(Z, max(1, Z.shape[0] // 20000)):
        X = chunk.reshape(-1, t, target.d_x).transpose(0, 2, 1)
        Y = eval_rnn(net, X)[:, :, t - 1]
        worst = max(worst, float(np.abs(Y - target(chunk)).max()))
    return worst


# ---------------------------------------------------------------------------
# built-in target catalog
# ---------------------------------------------------------------------------


def _constant(value):
    return lambda Z: np.full(Z.shape[0], value)


def _last_token(d_x):
    return lambda Z: Z[:, -d_x:].mean(axis=1)


def _mean_sinusoid(Z):
    return 0.5 * np.sin(2 * np.pi * Z.mean(axis=1))


def _mean_halfwave(Z):
    return 0.5 * np.sin(np.pi * Z.mean(axis=1))


def make_targets(name: str, N: int, d_x: int = 1) -> list[PastDependentTarget]:
    """Targets ``f^(1..N)`` from the catalog.

    ``constant`` (0.3), ``last-token``, ``mean-sinusoid`` (``sin(2 pi m) / 2``
    of the running mean ``m``), ``mean-halfwave`` (``sin(pi m) / 2``) and
    ``two-step-demo`` (``x1`` then ``(x1 + x2) / 2``; needs ``N=2``, ``d_x=1``).
    """
    if name == "constant":
        fn, beta = _constant(0.3), 1.0
    elif name == "last-token":
        fn, beta = _last_token(d_x), 1.0
    elif name == "mean-sinusoid":
        fn, beta = _mean_sinusoid, 1.0
    elif name == "mean-halfwave":
        fn, beta = _mean_halfwave, 1.0
    elif name == "two-step-demo":
        if N != 2 or d_x != 1:
            raise ValueError("two-step-demo is defined for N=2, d_x=1")
        fn, beta = (lambda Z: Z.mean(axis=1)), 1.0
    else:
        raise KeyError(f"unknown target {name!r}; choose from {sorted(TARGET_CATALOG)}")
    return [PastDependentTarget(t, fn, beta=beta, K=1.0, d_x=d_x) for t in range(1, N + 1)]


TARGET_CATALOG = ("constant", "last-token", "mean-sinusoid", "mean-halfwave", "two-step-demo")

