"""Interval bounds on every unit of a recurrent net over a box of inputs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .networks import DimensionError, relu

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class LayerBounds:
    """Bounds for one layer, each array shaped ``(N, W)``.

    ``drive`` is ``B u[t] + c``, ``pre`` adds ``A h[t-1]``, ``post`` is the
    (masked) activation of ``pre``.
    """

    drive_lo: np.ndarray
    drive_hi: np.ndarray
    pre_lo: np.ndarray
    pre_hi: np.ndarray
    post_lo: np.ndarray
    post_hi: np.ndarray

    def max_abs(self) -> float:
        return float(max(np.abs(a).max() for a in (self.drive_lo, self.drive_hi, self.pre_lo, self.pre_hi, self.post_lo, self.post_hi)))


def _affine_interval(M, lo, hi, c=None):
    Mp = np.maximum(M, 0.0)
    Mn = np.minimum(M, 0.0)
    out_lo = lo @ Mp.T + hi @ Mn.T
    out_hi = hi @ Mp.T + lo @ Mn.T
    if c is not None:
        out_lo = out_lo + c
        out_hi = out_hi + c
    # outward padding for rounding in the dot products
    pad = 4 * M.shape[1] * _EPS * (np.maximum(np.abs(lo), np.abs(hi)) @ np.abs(M).T)
    if c is not None:
        pad = pad + 2 * _EPS * np.abs(c)
    return out_lo - pad, out_hi + pad


def _side(v, d_x: int, horizon: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        v = v.reshape(-1, 1)
    try:
        return np.broadcast_to(v, (d_x, horizon))
    except ValueError:
        raise DimensionError(f"domain side of shape {v.shape} does not fit ({d_x}, {horizon})") from None


def _domain_box(domain, d_x: int, horizon: int):
    lo = _side(domain[0], d_x, horizon)
    hi = _side(domain[1], d_x, horizon)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("domain intervals must be finite")
    if np.any(lo > hi):
        raise ValueError("domain has an empty interval (lo > hi)")
    return lo.T.copy(), hi.T.copy()


def bound_propagate(net, domain=(0.0, 1.0), horizon: int = 1) -> list[LayerBounds]:
    """Sound per-layer, per-time, per-unit intervals by plain interval arithmetic.

    ``domain`` is ``(lo, hi)``; each side is a scalar, a length-``d_x`` vector,
    or a ``(d_x, horizon)`` array.
    """
    if horizon < 1:
        raise DimensionError("horizon must be at least 1")
    lo, hi = _domain_box(domain, net.input_dim, horizon)
    in_lo, in_hi = _affine_interval(net.embed, lo, hi)
    result = []
    for layer, mask in zip(net.layers, net.masks()):
        d_lo, d_hi = _affine_interval(layer.B, in_lo, in_hi, layer.c)
        W = layer.width
        pre_lo = np.empty((horizon, W))
        pre_hi = np.empty((horizon, W))
        post_lo = np.empty((horizon, W))
        post_hi = np.empty((horizon, W))
        prev_lo = np.zeros(W)
        prev_hi = np.zeros(W)
        for t in range(horizon):
            a_lo, a_hi = _affine_interval(layer.A, prev_lo, prev_hi)
            pre_lo[t] = a_lo + d_lo[t]
            pre_hi[t] = a_hi + d_hi[t]
            post_lo[t] = np.where(mask, relu(pre_lo[t]), pre_lo[t])
            post_hi[t] = np.where(mask, relu(pre_hi[t]), pre_hi[t])
            prev_lo, prev_hi = post_lo[t], post_hi[t]
        result.append(LayerBounds(d_lo, d_hi, pre_lo, pre_hi, post_lo, post_hi))
        in_lo, in_hi = post_lo, post_hi
    return result
