"""Growth function of the covering bound and the width/depth schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass

CASES = ("exp_mixing", "alg_mixing", "iid")


class ScheduleRangeError(ValueError):
    """Exponent ``alpha`` outside the admissible range."""


def covering_bound(W: float, L: float, K: float, n: float, delta: float) -> float:
    """``W^2 L^2 ln(max(W, L, 2)) ln(K n / delta)`` (unit leading constant)."""
    if min(W, L, K, n, delta) <= 0:
        raise ValueError("all arguments must be positive")
    if delta >= K * n:
        raise ValueError(f"need delta < K n for a positive log, got delta={delta}, K n={K * n}")
    return W * W * L * L * math.log(max(W, L, 2)) * math.log(K * n / delta)


@dataclass(frozen=True)
class Schedule:
    W: int
    L: int
    rate_exponent: float
    alpha_max: float


def schedule_exponents(beta: float, d_x: int, N: int, case: str = "exp_mixing", r: float = 1.0) -> tuple[float, float]:
    """``(e, rate)``: the combined width+depth exponent and the excess-risk exponent."""
    D = d_x * N
    if case in ("exp_mixing", "iid"):
        return D / (2 * D + 4 * beta), -2 * beta / (D + 2 * beta)
    if case == "alg_mixing":
        if r <= 0:
            raise ValueError("mixing order r must be positive")
        return r * D / ((2 * r + 2) * D + (4 * r + 8) * beta), -2 * r * beta / ((r + 1) * D + (2 * r + 4) * beta)
    raise ValueError(f"case must be one of {CASES}, got {case!r}")


def theory_schedule(n: int, alpha: float, beta: float, d_x: int, N: int, case: str = "exp_mixing",
                    r: float = 1.0, width_scale: float = 1.0, depth_scale: float = 1.0) -> Schedule:
    """``W = ceil(s_W n^alpha ln n)``, ``L = ceil(s_L n^(e - alpha) ln n)`` for ``0 <= alpha <= e``.

    The scales default to 1; they stand in for the unspecified constants.
    """
    e, rate = schedule_exponents(beta, d_x, N, case, r)
    if not 0.0 <= alpha <= e + 1e-12:
        raise ScheduleRangeError(f"alpha must lie in [0, {e:.6g}] for {case}, got {alpha}")
    if n < 2:
        raise ValueError("n must be at least 2")
    ln = math.log(n)
    W = max(1, math.ceil(width_scale * n**alpha * ln))
    L = max(1, math.ceil(depth_scale * n ** max(e - alpha, 0.0) * ln))
    return Schedule(W, L, rate, e)
