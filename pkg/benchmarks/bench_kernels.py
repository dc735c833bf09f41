"""Time the numba and numpy loss/gradient kernels on regression-sized problems.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from rnn_surgery._kernels import ParamLayout, loss_and_grad

SIZES = [  # (width, depth, windows, N)
    (4, 1, 256, 2),
    (12, 2, 1024, 2),
    (26, 2, 1640, 2),
    (32, 4, 2048, 5),
]


def measure(backend, layout, theta, X, y, repeat):
    loss_and_grad(layout, theta, X, y, 1.0, backend=backend)  # warm-up (jit compile)
    t = timeit.Timer(lambda: loss_and_grad(layout, theta, X, y, 1.0, backend=backend))
    return min(t.repeat(repeat=repeat, number=1))


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'W':>3} {'L':>2} {'M':>5} {'N':>2}  {'numpy ms':>9} {'numba ms':>9} {'speedup':>7}")
    for W, L, M, N in SIZES:
        layout = ParamLayout(1, W, L)
        theta = rng.normal(size=layout.size) * 0.3
        X = rng.uniform(size=(M, N, 1))
        y = rng.normal(size=M)
        t_np = measure("numpy", layout, theta, X, y, args.repeat)
        t_nb = measure("numba", layout, theta, X, y, args.repeat)
        print(f"{W:>3} {L:>2} {M:>5} {N:>2}  {1e3 * t_np:9.2f} {1e3 * t_nb:9.2f} {t_np / t_nb:7.2f}")


if __name__ == "__main__":
    main()
