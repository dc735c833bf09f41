"""Feedforward, recurrent and modified-recurrent ReLU networks.

All three families store dense float64 weights and are immutable once built.
Sequences follow the column convention: a single sequence is a ``(d_x, N)``
array whose column ``t`` is the token ``x[t]``; a batch is ``(B, d_x, N)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when array shapes do not chain."""


def relu(x):
    return np.maximum(x, 0.0)


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-d, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Feedforward networks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeedforwardNet:
    """``F_L o ... o F_1`` with ReLU after every layer but the last.

    ``layers`` is a sequence of ``(A_l, b_l)`` with ``A_l`` of shape
    ``(d_l, d_{l-1})``. Depth counts affine maps; width is the largest hidden
    layer (0 for a single affine map).
    """

    layers: tuple

    def __post_init__(self):
        if len(self.layers) == 0:
            raise DimensionError("a feedforward net needs at least one layer")
        frozen = []
        prev = None
        for i, (A, b) in enumerate(self.layers):
            A = _frozen(A, 2, f"A_{i + 1}")
            b = _frozen(b, 1, f"b_{i + 1}")
            if A.shape[0] != b.shape[0]:
                raise DimensionError(f"layer {i + 1}: A has {A.shape[0]} rows, b has {b.shape[0]}")
            if prev is not None and A.shape[1] != prev:
                raise DimensionError(f"layer {i + 1} expects {A.shape[1]} inputs, previous layer gives {prev}")
            prev = A.shape[0]
            frozen.append((A, b))
        object.__setattr__(self, "layers", tuple(frozen))

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def hidden_widths(self) -> list[int]:
        return [A.shape[0] for A, _ in self.layers[:-1]]

    @property
    def width(self) -> int:
        return max(self.hidden_widths, default=0)


def eval_fnn(net: FeedforwardNet, x) -> np.ndarray:
    """Evaluate on a vector ``(d_0,)`` or a batch of row vectors ``(B, d_0)``."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.ndim != 2 or h.shape[1] != net.input_dim:
        raise DimensionError(f"expected input of length {net.input_dim}, got shape {x.shape}")
    last = net.depth - 1
    for i, (A, b) in enumerate(net.layers):
        h = h @ A.T + b
        if i < last:
            h = relu(h)
    return h[0] if single else h


# ---------------------------------------------------------------------------
# Recurrent networks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RecurrentLayer:
    """``h[t] = act(A h[t-1] + B u[t] + c)`` with ``h[0] = 0``."""

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = _frozen(self.A, 2, "A")
        B = _frozen(self.B, 2, "B")
        c = _frozen(self.c, 1, "c")
        W = c.shape[0]
        if A.shape != (W, W) or B.shape != (W, W):
            raise DimensionError(f"recurrent layer shapes A{A.shape} B{B.shape} c{c.shape} do not match width {W}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c", c)

    @property
    def width(self) -> int:
        return self.c.shape[0]


def _as_layer(layer) -> RecurrentLayer:
    if isinstance(layer, RecurrentLayer):
        return layer
    return RecurrentLayer(*layer)


@dataclass(frozen=True)
class _RecurrentBase:
    embed: np.ndarray
    layers: tuple
    project: np.ndarray

    def _check(self):
        P = _frozen(self.embed, 2, "P")
        Q = _frozen(self.project, 2, "Q")
        layers = tuple(_as_layer(l) for l in self.layers)
        if not layers:
            raise DimensionError("a recurrent net needs at least one recurrent layer")
        W = layers[0].width
        for i, layer in enumerate(layers):
            if layer.width != W:
                raise DimensionError(f"layer {i + 1} has width {layer.width}, expected {W}")
        if P.shape[0] != W:
            raise DimensionError(f"P has {P.shape[0]} rows, hidden width is {W}")
        if Q.shape[1] != W:
            raise DimensionError(f"Q has {Q.shape[1]} columns, hidden width is {W}")
        object.__setattr__(self, "embed", P)
        object.__setattr__(self, "project", Q)
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.embed.shape[1]

    @property
    def output_dim(self) -> int:
        return self.project.shape[0]

    @property
    def width(self) -> int:
        return self.embed.shape[0]

    @property
    def depth(self) -> int:
        return len(self.layers)


@dataclass(frozen=True)
class RecurrentNet(_RecurrentBase):
    """``Q o R_L o ... o R_1 o P`` with an optional output clip ``[-K, K]``."""

    output_clip: float | None = None

    def __post_init__(self):
        self._check()
        if self.output_clip is not None:
            K = float(self.output_clip)
            if not (K >= 0 and np.isfinite(K)):
                raise ValueError(f"output_clip must be a finite nonnegative number, got {self.output_clip}")
            object.__setattr__(self, "output_clip", K)

    def masks(self) -> list[np.ndarray]:
        return [np.ones(self.width, dtype=bool) for _ in self.layers]


@dataclass(frozen=True)
class ModifiedRecurrentNet(_RecurrentBase):
    """Recurrent net whose layer ``l`` applies ReLU only to units in ``masks[l]``."""

    mask: tuple = field(default=())

    def __post_init__(self):
        self._check()
        if len(self.mask) != len(self.layers):
            raise DimensionError(f"need one mask per layer, got {len(self.mask)} for {len(self.layers)} layers")
        masks = []
        for i, m in enumerate(self.mask):
            m = np.array(m, dtype=bool, copy=True)
            if m.shape != (self.width,):
                raise DimensionError(f"mask {i + 1} has shape {m.shape}, expected ({self.width},)")
            m.setflags(write=False)
            masks.append(m)
        object.__setattr__(self, "mask", tuple(masks))

    def masks(self) -> list[np.ndarray]:
        return list(self.mask)

    @classmethod
    def from_index_sets(cls, embed, layers, project, index_sets: Sequence[Sequence[int]]):
        """Build from 0-based sets of ReLU unit indices, one per layer."""
        W = np.asarray(embed).shape[0]
        masks = []
        for idx in index_sets:
            m = np.zeros(W, dtype=bool)
            m[list(idx)] = True
            masks.append(m)
        return cls(embed, tuple(layers), project, tuple(masks))


def _batch_tokens(X, d_x: int) -> tuple[np.ndarray, bool]:
    """Return ``(B, N, d_x)`` token-major view plus whether input was a single sequence."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 2
    if single:
        X = X[None]
    if X.ndim != 3 or X.shape[1] != d_x:
        raise DimensionError(f"expected sequences with token dimension {d_x}, got shape {X.shape}")
    if X.shape[2] < 1:
        raise DimensionError("sequence length must be at least 1")
    return np.ascontiguousarray(X.transpose(0, 2, 1)), single


def _layer_forward(layer: RecurrentLayer, mask: np.ndarray, h_in: np.ndarray) -> np.ndarray:
    drive = h_in @ layer.B.T + layer.c
    out = np.empty_like(drive)
    prev = np.zeros((drive.shape[0], layer.width))
    full = bool(mask.all())
    for t in range(drive.shape[1]):
        pre = prev @ layer.A.T + drive[:, t]
        prev = relu(pre) if full else np.where(mask, relu(pre), pre)
        out[:, t] = prev
    return out


def hidden_states(net, X) -> list[np.ndarray]:
    """Per-layer hidden sequences, each ``(B, N, W)``; for soundness checks and tests."""
    U, _ = _batch_tokens(X, net.input_dim)
    states = []
    h = U @ net.embed.T
    for layer, mask in zip(net.layers, net.masks()):
        h = _layer_forward(layer, mask, h)
        states.append(h)
    return states


def _eval_recurrent(net, X) -> np.ndarray:
    U, single = _batch_tokens(X, net.input_dim)
    h = U @ net.embed.T
    for layer, mask in zip(net.layers, net.masks()):
        h = _layer_forward(layer, mask, h)
    Y = h @ net.project.T
    clip = getattr(net, "output_clip", None)
    if clip is not None:
        Y = np.clip(Y, -clip, clip)
    Y = Y.transpose(0, 2, 1)
    return Y[0] if single else Y


def eval_rnn(net: RecurrentNet, X) -> np.ndarray:
    """Evaluate on ``(d_x, N)`` or ``(B, d_x, N)``; returns ``(d_y, N)`` or ``(B, d_y, N)``."""
    return _eval_recurrent(net, X)


def eval_mrnn(net: ModifiedRecurrentNet, X) -> np.ndarray:
    """As :func:`eval_rnn` with the per-layer activation masks applied."""
    return _eval_recurrent(net, X)


def vec(X) -> np.ndarray:
    """Stack the columns of ``(d_x, t)`` (or ``(B, d_x, t)``) into ``(d_x t,)`` rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        return X.T.reshape(-1)
    return X.transpose(0, 2, 1).reshape(X.shape[0], -1)
