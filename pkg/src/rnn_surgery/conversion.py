"""Exact conversions between feedforward and recurrent ReLU networks.

* :func:`fnn_to_mrnn` realizes an FNN over ``vec(x[1:t0])`` as the step-``t0``
  output of a modified recurrent net (binomial accumulators, then the FNN
  layers applied token-wise).
* :func:`mrnn_to_rnn` removes the activation masks on a compact domain with
  the shift-and-scale trick: a masked-off unit ``v`` is stored as
  ``z0 + delta * v``, which ReLU leaves untouched.
* :func:`rnn_to_fnn` unrolls a recurrent net in time, carrying signed values
  through ReLU layers as ``relu(v) - relu(-v)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import bound_propagate
from .networks import DimensionError, FeedforwardNet, ModifiedRecurrentNet, RecurrentLayer, RecurrentNet

MAX_BINOMIAL_ORDER = 20


class BinomialOverflowError(ValueError):
    """Order outside the range where binomial entries stay exact in int64."""


class TimeIndexError(DimensionError):
    """Time index outside ``1..N``."""


class DomainError(ValueError):
    """Conversion domain is not a bounded box."""


def _comb(n: int, k: int) -> int:
    if n < 0 or k < 0 or k > n:
        return 0
    return math.comb(n, k)


def _check_order(n: int) -> None:
    if not 1 <= n <= MAX_BINOMIAL_ORDER:
        raise BinomialOverflowError(f"order must lie in [1, {MAX_BINOMIAL_ORDER}], got {n}")


def binom_matrix(n: int) -> np.ndarray:
    """``Lambda_n[i, j] = C(2n - i - j, n - i)`` for 1-based ``i, j``, as int64."""
    _check_order(n)
    return np.array([[_comb(2 * n - i - j, n - i) for j in range(1, n + 1)] for i in range(1, n + 1)], dtype=np.int64)


def binom_inverse(n: int) -> np.ndarray:
    """Closed-form inverse of :func:`binom_matrix`, as int64."""
    _check_order(n)
    out = np.empty((n, n), dtype=np.int64)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            s = sum(_comb(n - k, n - i) * _comb(n - k, n - j) for k in range(1, min(i, j) + 1))
            out[i - 1, j - 1] = s if (i + j) % 2 == 0 else -s
    return out


def exact_matmul(a, b) -> np.ndarray:
    """Integer matrix product in Python ints (no overflow)."""
    return np.asarray(a, dtype=object) @ np.asarray(b, dtype=object)


@dataclass(frozen=True)
class BinomialSystem:
    n: int
    lam: np.ndarray
    lam_inv: np.ndarray

    @classmethod
    def of_order(cls, n: int) -> "BinomialSystem":
        return cls(n, binom_matrix(n), binom_inverse(n))

    def is_exact_inverse(self) -> bool:
        prod = exact_matmul(self.lam, self.lam_inv)
        return bool(np.array_equal(prod, np.eye(self.n, dtype=np.int64).astype(object)))


# ---------------------------------------------------------------------------
# FNN -> MRNN
# ---------------------------------------------------------------------------


def _check_t0(t0: int, N: int) -> None:
    if N < 1 or not 1 <= t0 <= N:
        raise TimeIndexError(f"need 1 <= t0 <= N, got t0={t0}, N={N}")


def accumulator_weights(row_targets) -> np.ndarray:
    """Per-layer input weights ``b_i = sum_k lam_inv[k, i] A[k]`` for the accumulator chain.

    ``row_targets`` is ``(N, d_x)`` holding ``A[1..N]``; returns ``(N, d_x)``.
    """
    A = np.asarray(row_targets, dtype=np.float64)
    lam_inv = binom_inverse(A.shape[0]).astype(np.float64)
    return lam_inv.T @ A


def accumulator_mrnn(row_targets) -> ModifiedRecurrentNet:
    """Width ``d_x + 1``, depth ``N`` linear MRNN whose last unit at step ``t`` equals
    ``sum_{j<=t} A[N - t + j] x[j]``; the other units copy ``x[t]``.

    The projection returns the full hidden state.
    """
    A = np.asarray(row_targets, dtype=np.float64)
    N, d_x = A.shape
    b = accumulator_weights(A)
    W = d_x + 1
    P = np.vstack([np.eye(d_x), np.zeros((1, d_x))])
    layers = []
    for i in range(N):
        Al = np.zeros((W, W))
        Al[d_x, d_x] = 1.0
        Bl = np.zeros((W, W))
        Bl[:d_x, :d_x] = np.eye(d_x)
        Bl[d_x, :d_x] = b[i]
        Bl[d_x, d_x] = 1.0
        layers.append(RecurrentLayer(Al, Bl, np.zeros(W)))
    return ModifiedRecurrentNet(P, tuple(layers), np.eye(W), tuple(np.zeros(W, dtype=bool) for _ in range(N)))


def _infer_dx(fnn: FeedforwardNet, t0: int, d_x: int | None) -> int:
    if d_x is None:
        if fnn.input_dim % t0:
            raise DimensionError(f"FNN input dim {fnn.input_dim} is not a multiple of t0={t0}")
        d_x = fnn.input_dim // t0
    if d_x * t0 != fnn.input_dim:
        raise DimensionError(f"FNN input dim {fnn.input_dim} != d_x * t0 = {d_x * t0}")
    return d_x


def fnn_hidden_width(fnn: FeedforwardNet, d_x: int) -> int:
    """Block count ``W`` used by :func:`fnn_to_mrnn` (width is ``(d_x + 1) W``)."""
    W = fnn.width if fnn.depth > 1 else fnn.output_dim
    return max(W, -(-fnn.output_dim // (d_x + 1)))


def fnn_to_mrnn(fnn: FeedforwardNet, t0: int, N: int, d_x: int | None = None) -> ModifiedRecurrentNet:
    """MRNN of width ``(d_x+1) W`` and depth ``N + L`` with output at step ``t0``
    equal to ``fnn(vec(x[1:t0]))`` for every real input sequence of length ``N``."""
    _check_t0(t0, N)
    d_x = _infer_dx(fnn, t0, d_x)
    W = fnn_hidden_width(fnn, d_x)
    Wm = (d_x + 1) * W
    L = fnn.depth
    A1, b1 = fnn.layers[0]
    blk = d_x + 1

    P = np.zeros((Wm, d_x))
    for k in range(W):
        P[k * blk : k * blk + d_x] = np.eye(d_x)

    # accumulator targets: A_k[m] = 0 for m <= N - t0, else the (m - N + t0)-th token slice of row k
    targets = np.zeros((W, N, d_x))
    targets[: A1.shape[0], N - t0 :] = A1.reshape(A1.shape[0], t0, d_x)
    lam_inv = binom_inverse(N).astype(np.float64)
    b = np.einsum("ki,wkd->wid", lam_inv, targets)  # b[k, i] = sum_m lam_inv[m, i] A_k[m]

    layers = []
    masks = []
    for i in range(N):
        Al = np.zeros((Wm, Wm))
        Bl = np.zeros((Wm, Wm))
        for k in range(W):
            o = k * blk
            acc = o + d_x
            Al[acc, acc] = 1.0
            Bl[o : o + d_x, o : o + d_x] = np.eye(d_x)
            Bl[acc, o : o + d_x] = b[k, i]
            Bl[acc, acc] = 1.0
        layers.append(RecurrentLayer(Al, Bl, np.zeros(Wm)))
        masks.append(np.zeros(Wm, dtype=bool))

    # first FNN layer: activation of accumulator + bias, written to units 0..d_1-1
    B = np.zeros((Wm, Wm))
    c = np.zeros(Wm)
    for k in range(A1.shape[0]):
        B[k, k * blk + d_x] = 1.0
    c[: A1.shape[0]] = b1
    layers.append(RecurrentLayer(np.zeros((Wm, Wm)), B, c))
    masks.append(np.full(Wm, L > 1))

    for l in range(1, L):
        A, bl = fnn.layers[l]
        B = np.zeros((Wm, Wm))
        B[: A.shape[0], : A.shape[1]] = A
        c = np.zeros(Wm)
        c[: A.shape[0]] = bl
        layers.append(RecurrentLayer(np.zeros((Wm, Wm)), B, c))
        masks.append(np.full(Wm, l < L - 1))

    Q = np.zeros((fnn.output_dim, Wm))
    Q[:, : fnn.output_dim] = np.eye(fnn.output_dim)
    return ModifiedRecurrentNet(P, tuple(layers), Q, tuple(masks))


# ---------------------------------------------------------------------------
# MRNN -> RNN
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShiftScale:
    """Per-layer shift ``z0`` and scale ``delta`` chosen by :func:`mrnn_to_rnn`."""

    z0: float
    delta: float


def choose_shift_scale(layer_bounds, mask, margin: float = 1.0, max_halvings: int = 60) -> ShiftScale:
    """``z0`` = largest propagated magnitude plus ``margin``; ``delta`` halves from 1
    until every shifted quantity the ReLU must pass through is certified nonnegative."""
    z0 = layer_bounds.max_abs() + margin
    need = np.concatenate([layer_bounds.drive_lo.ravel(), layer_bounds.pre_lo[:, ~mask].ravel()])
    low = float(need.min()) if need.size else 0.0
    delta = 1.0
    for _ in range(max_halvings):
        if z0 + delta * low >= 0:
            return ShiftScale(z0, delta)
        delta /= 2
    raise AssertionError("no admissible delta for finite bounds")  # unreachable when z0 > max |bounds|


def mrnn_to_rnn(mrnn: ModifiedRecurrentNet, domain=(0.0, 1.0), *, N: int, margin: float = 1.0) -> RecurrentNet:
    """RNN of width ``W + 1`` and depth ``2L`` agreeing with ``mrnn`` at steps ``1..N``
    on every input whose entries lie in ``domain``."""
    lo, hi = domain
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise DomainError("mrnn_to_rnn needs a bounded domain")
    if N < 1:
        raise TimeIndexError("N must be at least 1")
    bounds = bound_propagate(mrnn, domain, N)
    d = mrnn.width
    D = d + 1
    P = np.zeros((D, mrnn.input_dim))
    P[:d] = mrnn.embed
    M_prev = np.hstack([np.eye(d), np.zeros((d, 1))])  # recovers the true layer input from the RNN state
    layers = []
    for layer, mask, lb in zip(mrnn.layers, mrnn.masks(), bounds):
        ss = choose_shift_scale(lb, mask, margin)
        z0, delta = ss.z0, ss.delta
        M = np.zeros((d, D))
        act = np.flatnonzero(mask)
        M[act, act] = 1.0
        lin = np.flatnonzero(~mask)
        M[lin, lin] = 1.0 / delta
        M[lin, d] = -1.0 / delta

        B1 = np.zeros((D, D))
        B1[:d] = delta * (layer.B @ M_prev)
        c1 = np.full(D, z0)
        c1[:d] += delta * layer.c
        layers.append(RecurrentLayer(np.zeros((D, D)), B1, c1))

        gain = np.where(mask, 1.0, delta)
        A2 = np.zeros((D, D))
        A2[:d] = gain[:, None] * (layer.A @ M)
        B2 = np.diag(np.concatenate([np.where(mask, 1.0 / delta, 1.0), [1.0]]))
        c2 = np.zeros(D)
        c2[:d] = np.where(mask, -z0 / delta, 0.0)
        layers.append(RecurrentLayer(A2, B2, c2))
        M_prev = M
    return RecurrentNet(P, tuple(layers), mrnn.project @ M_prev)


def fnn_to_rnn(fnn: FeedforwardNet, t0: int, N: int, d_x: int | None = None) -> RecurrentNet:
    """RNN of width ``(d_x+1) W + 1`` and depth ``2(N + L)`` whose step-``t0`` output
    equals ``fnn(vec(x[1:t0]))`` on ``[0, 1]^{d_x x N}``."""
    return mrnn_to_rnn(fnn_to_mrnn(fnn, t0, N, d_x), (0.0, 1.0), N=N)


# ---------------------------------------------------------------------------
# RNN -> FNN
# ---------------------------------------------------------------------------


def _unroll_blocks(layer: RecurrentLayer, t0: int):
    """The ``t0 + 1`` affine maps unrolling one recurrent layer over ``t0`` steps.

    Input is ``(u[1]; ...; u[t0])``; output is ``(h[1]; ...; h[t0])``.
    """
    W = layer.width
    I = np.eye(W)
    R = 2 * t0 - 1
    maps = []

    A1 = np.zeros((R * W, t0 * W))
    b1 = np.zeros(R * W)
    A1[:W, :W] = layer.B
    b1[:W] = layer.c
    for s in range(1, t0):
        A1[(2 * s - 1) * W : 2 * s * W, s * W : (s + 1) * W] = I
        A1[2 * s * W : (2 * s + 1) * W, s * W : (s + 1) * W] = -I
    maps.append((A1, b1))

    for i in range(2, t0 + 1):
        Ai = np.zeros((R * W, R * W))
        bi = np.zeros(R * W)
        for k in range(2 * i - 4):
            Ai[k * W : (k + 1) * W, k * W : (k + 1) * W] = I
        r = 2 * i - 4
        Ai[r * W : (r + 1) * W, r * W : (r + 1) * W] = I
        Ai[(r + 1) * W : (r + 2) * W, r * W : (r + 1) * W] = -I
        Ai[(r + 2) * W : (r + 3) * W, r * W : (r + 1) * W] = layer.A
        Ai[(r + 2) * W : (r + 3) * W, (r + 1) * W : (r + 2) * W] = layer.B
        Ai[(r + 2) * W : (r + 3) * W, (r + 2) * W : (r + 3) * W] = -layer.B
        bi[(r + 2) * W : (r + 3) * W] = layer.c
        for k in range(2 * i - 1, R):
            Ai[k * W : (k + 1) * W, k * W : (k + 1) * W] = I
        maps.append((Ai, bi))

    Af = np.zeros((t0 * W, R * W))
    for s in range(t0 - 1):
        Af[s * W : (s + 1) * W, 2 * s * W : (2 * s + 1) * W] = I
        Af[s * W : (s + 1) * W, (2 * s + 1) * W : (2 * s + 2) * W] = -I
    Af[(t0 - 1) * W :, (R - 1) * W :] = I
    maps.append((Af, np.zeros(t0 * W)))
    return maps


def rnn_to_fnn(rnn: RecurrentNet, t0: int, N: int | None = None) -> FeedforwardNet:
    """FNN over ``vec(x[1:t0])`` equal to ``rnn(X)[t0]`` for all real inputs.

    Hidden width is ``(2 t0 - 1) W`` and there are ``t0 L`` ReLU layers
    (``t0 L + 1`` affine maps). Every unrolled block is kept verbatim; adjacent
    affine maps are fused only where one layer's read-out meets the next
    layer's input.
    """
    if N is None:
        N = t0
    _check_t0(t0, N)
    if rnn.output_clip is not None:
        raise ValueError("rnn_to_fnn does not unroll output clips")
    W = rnn.width
    affine = []  # list of (A, b, relu_after)
    pending = np.kron(np.eye(t0), rnn.embed)  # linear map waiting to be fused into the next affine
    pending_b = np.zeros(pending.shape[0])
    for layer in rnn.layers:
        maps = _unroll_blocks(layer, t0)
        A, b = maps[0]
        affine.append((A @ pending, A @ pending_b + b))
        affine.extend(maps[1:-1])
        pending, pending_b = maps[-1]
    readout = np.zeros((rnn.output_dim, t0 * W))
    readout[:, (t0 - 1) * W :] = rnn.project
    affine.append((readout @ pending, readout @ pending_b))
    return FeedforwardNet(tuple(affine))
