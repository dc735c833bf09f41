"""Stationary token processes and the window/block bookkeeping built on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

KINDS = ("iid", "exponential_mixing")


@dataclass(frozen=True)
class MixingConfig:
    """Probit-transformed Gaussian AR(1): ``z_t = rho z_{t-1} + sqrt(1 - rho^2) eta_t``,
    tokens ``Phi(z_t)``. Marginals are exactly uniform; ``rho = 0`` is iid."""

    kind: str = "exponential_mixing"
    rho: float = 0.5
    d_x: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if self.d_x < 1:
            raise ValueError("d_x must be positive")

    @property
    def effective_rho(self) -> float:
        return 0.0 if self.kind == "iid" else self.rho


def _rng(seed_or_rng, *stream) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(np.random.SeedSequence([int(seed_or_rng), *map(int, stream)]))


def latent_chain(rho: float, shape_prefix: tuple, n: int, d_x: int, rng: np.random.Generator) -> np.ndarray:
    """Stationary AR(1) paths of length ``n``; returns ``shape_prefix + (n, d_x)``."""
    eta = rng.standard_normal(shape_prefix + (n, d_x))
    if rho == 0.0:
        return eta
    z = np.empty_like(eta)
    z[..., 0, :] = eta[..., 0, :]
    s = np.sqrt(1.0 - rho * rho)
    for t in range(1, n):
        z[..., t, :] = rho * z[..., t - 1, :] + s * eta[..., t, :]
    return z


def gen_latent(cfg: MixingConfig, n: int, rng=None) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be at least 1")
    return latent_chain(cfg.effective_rho, (), n, cfg.d_x, _rng(cfg.seed if rng is None else rng))


def gen_sequence(cfg: MixingConfig, n: int, rng=None) -> np.ndarray:
    """``(n, d_x)`` tokens in ``[0, 1]``; deterministic in ``cfg.seed`` unless ``rng`` is given."""
    return ndtr(gen_latent(cfg, n, rng))


def stationary_windows(cfg: MixingConfig, m: int, N: int, rng) -> np.ndarray:
    """``m`` independent draws from the law of ``N`` consecutive tokens, as ``(m, d_x, N)``."""
    z = latent_chain(cfg.effective_rho, (m,), N, cfg.d_x, rng)
    return ndtr(z).transpose(0, 2, 1)


def sliding_windows(xs, ys, N: int):
    """Overlapping windows ``x[t-N+1..t]`` for ``t = N..n``.

    Returns ``(X, Y)`` with ``X`` of shape ``(n-N+1, d_x, N)`` and ``Y = ys[N-1:]``
    (``None`` when ``ys`` is ``None``).
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs[:, None]
    n = xs.shape[0]
    if N < 1 or n < N:
        raise ValueError(f"need 1 <= N <= n, got N={N}, n={n}")
    X = np.lib.stride_tricks.sliding_window_view(xs, N, axis=0).copy()  # (n-N+1, d_x, N)
    if ys is None:
        return X, None
    ys = np.asarray(ys, dtype=np.float64)
    if ys.shape[0] != n:
        raise ValueError("xs and ys must have the same length")
    return X, ys[N - 1 :].copy()


def make_blocks(xs, N: int) -> np.ndarray:
    """Consecutive non-overlapping blocks ``(n // N, d_x, N)``; trailing tokens are dropped."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs[:, None]
    if N < 1:
        raise ValueError("N must be positive")
    nb = xs.shape[0] // N
    return xs[: nb * N].reshape(nb, N, xs.shape[1]).transpose(0, 2, 1).copy()


def make_subblocks(blocks, l: int, a: int):
    """Blocks ``a, a+l, a+2l, ...`` (1-based), ``len(blocks) // l`` of them."""
    if l < 1 or not 1 <= a <= l:
        raise ValueError(f"need 1 <= a <= l, got a={a}, l={l}")
    count = len(blocks) // l
    return blocks[a - 1 :: l][:count]
