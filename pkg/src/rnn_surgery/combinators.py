"""Weight-level operations on recurrent nets: padding, composition,
concatenation and linear combination.

Each operation returns a new :class:`RecurrentNet` whose evaluation equals the
corresponding combination of the operands' evaluations.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import block_diag

from .networks import DimensionError, FeedforwardNet, RecurrentLayer, RecurrentNet


class InvalidTargetError(ValueError):
    """Requested padding target is smaller than the network."""


def _embed_block(M, rows: int, cols: int) -> np.ndarray:
    out = np.zeros((rows, cols))
    out[: M.shape[0], : M.shape[1]] = M
    return out


def _require_unclipped(*nets):
    for net in nets:
        if net.output_clip is not None:
            raise ValueError("operand has an output clip; compose trunc_net explicitly instead")


def pad(net: RecurrentNet, W2: int, L2: int) -> RecurrentNet:
    """Embed ``net`` into width ``W2`` and depth ``L2`` without changing its function.

    Extra layers carry the original units with ``(A, B, c) = (O, diag(I, O), 0)``.
    That carry is exact because the carried values are post-ReLU, hence nonnegative.
    """
    W, L = net.width, net.depth
    if W2 < W or L2 < L:
        raise InvalidTargetError(f"cannot pad a ({W}, {L}) net down to ({W2}, {L2})")
    if (W2, L2) == (W, L):
        return net
    layers = [
        RecurrentLayer(_embed_block(l.A, W2, W2), _embed_block(l.B, W2, W2), np.concatenate([l.c, np.zeros(W2 - W)]))
        for l in net.layers
    ]
    carry = np.zeros((W2, W2))
    carry[:W, :W] = np.eye(W)
    layers += [RecurrentLayer(np.zeros((W2, W2)), carry, np.zeros(W2)) for _ in range(L2 - L)]
    return RecurrentNet(
        _embed_block(net.embed, W2, net.input_dim),
        tuple(layers),
        _embed_block(net.project, net.output_dim, W2),
        net.output_clip,
    )


def compose(outer: RecurrentNet, inner: RecurrentNet) -> RecurrentNet:
    """``outer o inner`` with width ``max(W1, W2)`` and depth ``L1 + L2``."""
    if inner.output_dim != outer.input_dim:
        raise DimensionError(f"inner emits {inner.output_dim}-d tokens, outer expects {outer.input_dim}")
    _require_unclipped(inner)
    W = max(inner.width, outer.width)
    inner = pad(inner, W, inner.depth)
    outer = pad(outer, W, outer.depth)
    first = outer.layers[0]
    fused = RecurrentLayer(first.A, first.B @ outer.embed @ inner.project, first.c)
    layers = inner.layers + (fused,) + outer.layers[1:]
    return RecurrentNet(inner.embed, layers, outer.project, outer.output_clip)


def _stack(n1: RecurrentNet, n2: RecurrentNet):
    if n1.input_dim != n2.input_dim:
        raise DimensionError(f"input dimensions differ: {n1.input_dim} vs {n2.input_dim}")
    _require_unclipped(n1, n2)
    L = max(n1.depth, n2.depth)
    n1 = pad(n1, n1.width, L)
    n2 = pad(n2, n2.width, L)
    layers = tuple(
        RecurrentLayer(block_diag(a.A, b.A), block_diag(a.B, b.B), np.concatenate([a.c, b.c]))
        for a, b in zip(n1.layers, n2.layers)
    )
    return n1, n2, np.vstack([n1.embed, n2.embed]), layers


def concat(n1: RecurrentNet, n2: RecurrentNet) -> RecurrentNet:
    """Token-wise stacked outputs ``(n1(X), n2(X))``; width ``W1 + W2``, depth ``max(L1, L2)``."""
    n1, n2, P, layers = _stack(n1, n2)
    return RecurrentNet(P, layers, block_diag(n1.project, n2.project))


def lincomb(c1: float, n1: RecurrentNet, c2: float, n2: RecurrentNet) -> RecurrentNet:
    """``c1 n1 + c2 n2``; same structure as :func:`concat` with projection ``(c1 Q1, c2 Q2)``."""
    if n1.output_dim != n2.output_dim:
        raise DimensionError(f"output dimensions differ: {n1.output_dim} vs {n2.output_dim}")
    n1, n2, P, layers = _stack(n1, n2)
    return RecurrentNet(P, layers, np.hstack([c1 * n1.project, c2 * n2.project]))


def identity_rnn(d: int) -> RecurrentNet:
    """Width ``2d`` depth 1 net reproducing its input exactly, via ``x = relu(x) - relu(-x)``."""
    I = np.eye(d)
    P = np.vstack([I, -I])
    return RecurrentNet(P, (RecurrentLayer(np.zeros((2 * d, 2 * d)), np.eye(2 * d), np.zeros(2 * d)),), np.hstack([I, -I]))


def tokenwise_rnn(fnn: FeedforwardNet) -> RecurrentNet:
    """Apply an FNN independently at every time step.

    Uses ``depth - 1`` recurrent layers with ``A = 0``. The last affine bias has
    no home in the linear projection, so a constant unit ``relu(1) = 1`` is
    appended when that bias is nonzero.
    """
    if fnn.depth < 2:
        raise DimensionError("a token-wise net needs at least one hidden layer")
    A_L, b_L = fnn.layers[-1]
    const = bool(np.any(b_L != 0))
    W = fnn.width + (1 if const else 0)
    A1, b1 = fnn.layers[0]
    P = _embed_block(A1, W, fnn.input_dim)
    layers = []
    for i, (A, b) in enumerate(fnn.layers[:-1]):
        B = np.zeros((W, W))
        if i == 0:
            B[: A.shape[0], : A.shape[0]] = np.eye(A.shape[0])
        else:
            B[: A.shape[0], : A.shape[1]] = A
        c = np.zeros(W)
        c[: A.shape[0]] = b
        if const:
            c[-1] = 1.0
        layers.append(RecurrentLayer(np.zeros((W, W)), B, c))
    Q = _embed_block(A_L, fnn.output_dim, W)
    if const:
        Q[:, -1] = b_L
    return RecurrentNet(P, tuple(layers), Q)
