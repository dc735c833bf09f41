"""Loss and BPTT gradient for a scalar-output RNN read out at the last step.

Parameters live in one flat vector (see :class:`ParamLayout`). Two
implementations share the same signature: a numba kernel (default) and a
vectorized numpy one. Set ``RNN_SURGERY_NUMBA=0`` to force numpy.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None


def numba_enabled() -> bool:
    return numba is not None and os.environ.get("RNN_SURGERY_NUMBA", "1") != "0"


@dataclass(frozen=True)
class ParamLayout:
    """Flat order: ``P (W x d_x)``, then ``A, B, c`` per layer, then ``Q (W,)``."""

    d_x: int
    W: int
    L: int

    @property
    def size(self) -> int:
        return self.W * self.d_x + self.L * (2 * self.W * self.W + self.W) + self.W

    def split(self, theta):
        W, d_x = self.W, self.d_x
        i = W * d_x
        P = theta[:i].reshape(W, d_x)
        A, B, c = [], [], []
        for _ in range(self.L):
            A.append(theta[i : i + W * W].reshape(W, W))
            i += W * W
            B.append(theta[i : i + W * W].reshape(W, W))
            i += W * W
            c.append(theta[i : i + W])
            i += W
        return P, A, B, c, theta[i : i + W]

    def stacked(self, theta):
        P, A, B, c, Q = self.split(np.ascontiguousarray(theta, dtype=np.float64))
        return P, np.stack(A), np.stack(B), np.stack(c), Q

    def pack(self, P, A, B, c, Q) -> np.ndarray:
        parts = [np.ravel(P)]
        for a, b, cc in zip(A, B, c):
            parts += [np.ravel(a), np.ravel(b), np.ravel(cc)]
        parts.append(np.ravel(Q))
        return np.concatenate(parts).astype(np.float64)


# ---------------------------------------------------------------------------
# numpy
# ---------------------------------------------------------------------------


def _loss_grad_numpy(P, A, B, c, Q, X, y, K, want_grad):
    M, N, _ = X.shape
    L, W = c.shape
    u = X @ P.T
    inputs = [u]
    pres = []
    for l in range(L):
        drive = u @ B[l].T + c[l]
        pre = np.empty_like(drive)
        out = np.empty_like(drive)
        h = np.zeros((M, W))
        for t in range(N):
            pre[:, t] = h @ A[l].T + drive[:, t]
            h = np.maximum(pre[:, t], 0.0)
            out[:, t] = h
        pres.append(pre)
        inputs.append(out)
        u = out
    yhat = u[:, -1] @ Q
    r = np.clip(yhat, -K, K) - y
    loss = float(np.mean(r * r))
    if not want_grad:
        return loss, None
    g = 2.0 * r / M * (np.abs(yhat) < K)
    gQ = g @ u[:, -1]
    gA = np.zeros_like(A)
    gB = np.zeros_like(B)
    gc = np.zeros_like(c)
    du = np.zeros((M, N, W))
    du[:, -1] = np.outer(g, Q)
    for l in range(L - 1, -1, -1):
        pre, hin, hout = pres[l], inputs[l], inputs[l + 1]
        dpre = np.empty_like(pre)
        carry = np.zeros((M, W))
        for t in range(N - 1, -1, -1):
            d = (du[:, t] + carry) * (pre[:, t] > 0)
            dpre[:, t] = d
            carry = d @ A[l]
        gA[l] = np.einsum("mtw,mtv->wv", dpre[:, 1:], hout[:, :-1])
        gB[l] = np.einsum("mtw,mtv->wv", dpre, hin)
        gc[l] = dpre.sum(axis=(0, 1))
        du = dpre @ B[l]
    gP = np.einsum("mtw,mtd->wd", du, X)
    return loss, (gP, gA, gB, gc, gQ)


# ---------------------------------------------------------------------------
# numba
# ---------------------------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True)
    def _loss_grad_numba(P, A, B, c, Q, X, y, K, want_grad):  # pragma: no cover - compiled
        M, N, d_x = X.shape
        L, W = c.shape
        H = np.zeros((L + 1, M, N, W))  # H[0] = embedded inputs, H[l+1] = layer l output
        pre = np.zeros((L, M, N, W))
        for m in range(M):
            for t in range(N):
                for i in range(W):
                    s = 0.0
                    for k in range(d_x):
                        s += P[i, k] * X[m, t, k]
                    H[0, m, t, i] = s
        for l in range(L):
            for m in range(M):
                for t in range(N):
                    for i in range(W):
                        s = c[l, i]
                        for j in range(W):
                            s += B[l, i, j] * H[l, m, t, j]
                            if t > 0:
                                s += A[l, i, j] * H[l + 1, m, t - 1, j]
                        pre[l, m, t, i] = s
                        H[l + 1, m, t, i] = s if s > 0.0 else 0.0
        loss = 0.0
        g = np.zeros(M)
        for m in range(M):
            yh = 0.0
            for i in range(W):
                yh += Q[i] * H[L, m, N - 1, i]
            yc = min(max(yh, -K), K)
            r = yc - y[m]
            loss += r * r
            if abs(yh) < K:
                g[m] = 2.0 * r / M
        loss /= M
        gP = np.zeros_like(P)
        gA = np.zeros_like(A)
        gB = np.zeros_like(B)
        gc = np.zeros_like(c)
        gQ = np.zeros_like(Q)
        if not want_grad:
            return loss, gP, gA, gB, gc, gQ
        du = np.zeros((M, N, W))
        for m in range(M):
            for i in range(W):
                gQ[i] += g[m] * H[L, m, N - 1, i]
                du[m, N - 1, i] = g[m] * Q[i]
        d = np.zeros(W)
        carry = np.zeros(W)
        for l in range(L - 1, -1, -1):
            dn = np.zeros((M, N, W))
            for m in range(M):
                carry[:] = 0.0
                for t in range(N - 1, -1, -1):
                    for i in range(W):
                        v = du[m, t, i] + carry[i]
                        d[i] = v if pre[l, m, t, i] > 0.0 else 0.0
                    for i in range(W):
                        di = d[i]
                        if di == 0.0:
                            continue
                        gc[l, i] += di
                        for j in range(W):
                            gB[l, i, j] += di * H[l, m, t, j]
                            dn[m, t, j] += di * B[l, i, j]
                        if t > 0:
                            for j in range(W):
                                gA[l, i, j] += di * H[l + 1, m, t - 1, j]
                    for j in range(W):
                        s = 0.0
                        for i in range(W):
                            s += d[i] * A[l, i, j]
                        carry[j] = s
            du = dn
        for m in range(M):
            for t in range(N):
                for i in range(W):
                    v = du[m, t, i]
                    if v != 0.0:
                        for k in range(d_x):
                            gP[i, k] += v * X[m, t, k]
        return loss, gP, gA, gB, gc, gQ


def loss_and_grad(layout: ParamLayout, theta, X, y, K: float, want_grad: bool = True, backend: str | None = None):
    """Mean squared error of the clipped last-step output and its gradient.

    ``X`` is token-major ``(M, N, d_x)``. Returns ``(loss, flat_grad or None)``.
    """
    P, A, B, c, Q = layout.stacked(theta)
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if backend is None:
        backend = "numba" if numba_enabled() else "numpy"
    if backend == "numba":
        loss, *grads = _loss_grad_numba(P, A, B, c, Q, X, y, float(K), want_grad)
        if not want_grad:
            return float(loss), None
    elif backend == "numpy":
        loss, grads = _loss_grad_numpy(P, A, B, c, Q, X, y, float(K), want_grad)
        if grads is None:
            return loss, None
    else:
        raise ValueError(f"unknown backend {backend!r}")
    gP, gA, gB, gc, gQ = grads
    return float(loss), layout.pack(gP, gA, gB, gc, gQ)
