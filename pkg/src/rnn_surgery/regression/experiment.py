"""Excess-risk estimation and the sample-size sweep."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..networks import RecurrentNet
from .data import MixingConfig, gen_sequence, sliding_windows, stationary_windows
from .erm import TrainConfig, predict_last, train_erm
from .theory import theory_schedule


def mean_sinusoid(K: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """``K sin(2 pi mean(window)) / 2`` on windows ``(M, d_x, N)``."""

    def f(windows):
        w = np.asarray(windows, dtype=np.float64)
        return 0.5 * K * np.sin(2 * np.pi * w.reshape(w.shape[0], -1).mean(axis=1))

    return f


@dataclass(frozen=True)
class RegressionTask:
    """``Y_t = f*(x[t-N+1..t]) + sigma eps_t`` with Gaussian ``eps``; ``f*`` acts on ``(M, d_x, N)``."""

    f_star: Callable[[np.ndarray], np.ndarray]
    N: int
    sigma: float = 0.1
    beta: float = 1.0
    K: float = 1.0

    def __post_init__(self):
        if self.N < 1 or self.sigma < 0 or self.beta <= 0 or self.K <= 0:
            raise ValueError("need N >= 1, sigma >= 0, beta > 0, K > 0")


def make_dataset(task: RegressionTask, cfg: MixingConfig, n: int, rng: np.random.Generator):
    """``n`` tokens and their ``n - N + 1`` windowed responses."""
    xs = gen_sequence(cfg, n, rng)
    X, _ = sliding_windows(xs, None, task.N)
    y = task.f_star(X) + task.sigma * rng.standard_normal(X.shape[0])
    return X, y


@dataclass(frozen=True)
class RiskEstimate:
    mean: float
    stderr: float

    def __float__(self):
        return self.mean


def excess_risk(fitted, task: RegressionTask, m: int, cfg: MixingConfig, rng=None) -> RiskEstimate:
    """Monte-Carlo ``E (f_hat - f*)^2`` over ``m`` independent stationary windows."""
    if m < 1000:
        raise ValueError("use at least 1000 Monte-Carlo windows")
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x5EED]))
    W = stationary_windows(cfg, m, task.N, rng)
    pred = predict_last(fitted, W) if isinstance(fitted, RecurrentNet) else np.asarray(fitted(W), dtype=np.float64)
    sq = (pred - task.f_star(W)) ** 2
    return RiskEstimate(float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(m)))


@dataclass(frozen=True)
class RunRecord:
    n: int
    replication: int
    excess_risk: float
    stderr: float
    W: int
    L: int
    wall_seconds: float


@dataclass
class RateExperimentResult:
    rows: list  # (n, mean excess risk, std over replications)
    slope: float
    theoretical_exponent: float
    runs: list = field(default_factory=list)
    degenerate: bool = False

    def means(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    def strictly_decreasing(self) -> bool:
        m = self.means()
        return bool(np.all(np.diff(m) < 0))


def _n_workers() -> int:
    env = os.environ.get("RNN_SURGERY_THREADS")
    return max(1, int(env)) if env else (os.cpu_count() or 1)


@dataclass(frozen=True)
class _Job:
    task: RegressionTask
    cfg: MixingConfig
    n: int
    rep: int
    W: int
    L: int
    train: TrainConfig
    mc_size: int
    seed: int


def _run_one(job: _Job) -> RunRecord:
    start = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence([job.seed, job.n, job.rep, 1]))
    data = make_dataset(job.task, job.cfg, job.n, rng)
    tcfg = replace(job.train, width=job.W, depth=job.L, seed=int(rng.integers(2**31)))
    net = train_erm(job.task, data, tcfg)
    mc_rng = np.random.default_rng(np.random.SeedSequence([job.seed, job.n, job.rep, 2]))
    risk = excess_risk(net, job.task, job.mc_size, job.cfg, mc_rng)
    return RunRecord(job.n, job.rep, risk.mean, risk.stderr, job.W, job.L, time.perf_counter() - start)


def run_grid(task: RegressionTask, cfg: MixingConfig, ns, replications: int, train: TrainConfig,
             alpha: float | None = None, case: str | None = None, r: float = 1.0, width_scale: float = 1.0,
             depth_scale: float = 1.0, mc_size: int = 20000, seed: int | None = None):
    """Train and score every ``(n, replication)`` pair; returns ``(runs, rate exponent)``.

    ``alpha`` defaults to the top of its range (all growth in width). Each run
    draws from its own seed stream, so results do not depend on how runs are
    scheduled across ``RNN_SURGERY_THREADS`` workers.
    """
    if case is None:
        case = "iid" if cfg.effective_rho == 0 else "exp_mixing"
    seed = cfg.seed if seed is None else seed
    jobs = []
    rate = None
    for n in ns:
        a = theory_schedule(n, 0.0, task.beta, cfg.d_x, task.N, case, r).alpha_max if alpha is None else alpha
        sched = theory_schedule(n, a, task.beta, cfg.d_x, task.N, case, r, width_scale, depth_scale)
        rate = sched.rate_exponent
        jobs += [_Job(task, cfg, n, k, sched.W, sched.L, train, mc_size, seed) for k in range(replications)]
    workers = min(_n_workers(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            runs = list(pool.map(_run_one, jobs))
    else:
        runs = [_run_one(j) for j in jobs]
    return runs, rate


def summarize(runs, ns, rate: float) -> RateExperimentResult:
    """Per-``n`` mean and spread plus the least-squares slope of ``log risk`` on ``log n``."""
    rows = []
    for n in ns:
        vals = np.array([rr.excess_risk for rr in runs if rr.n == n])
        rows.append((n, float(vals.mean()), float(vals.std(ddof=1)) if len(vals) > 1 else 0.0))
    means = np.array([m for _, m, _ in rows])
    degenerate = bool(np.all(means <= 1e-3) or np.any(means <= 0))
    slope = float("nan")
    if len(ns) >= 2:
        slope = float(np.polyfit(np.log(ns), np.log(np.maximum(means, 1e-300)), 1)[0])
    return RateExperimentResult(rows, slope, rate, list(runs), degenerate)


def rate_experiment(task: RegressionTask, cfg: MixingConfig, ns, replications: int, train: TrainConfig,
                    alpha: float | None = None, case: str | None = None, r: float = 1.0,
                    width_scale: float = 1.0, depth_scale: float = 1.0, mc_size: int = 20000,
                    seed: int | None = None) -> RateExperimentResult:
    """Sweep ``ns`` with sizes from :func:`theory_schedule`; see :func:`run_grid`."""
    ns = [int(n) for n in ns]
    if len(ns) < 3 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("ns must be strictly increasing with at least 3 values")
    if replications < 3:
        raise ValueError("need at least 3 replications")
    runs, rate = run_grid(task, cfg, ns, replications, train, alpha, case, r, width_scale, depth_scale, mc_size, seed)
    return summarize(runs, ns, rate)
