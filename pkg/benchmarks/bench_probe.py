"""Time the probe's full-batch trainer: numba kernel vs numpy fallback.

Both backends run the identical update rule from zero init, so their weight
trajectories agree and the table doubles as a numeric cross-check. tol is
pinned to 0 so every run executes exactly --max-epochs epochs.

Usage:
    python3 benchmarks/bench_probe.py [--repeats 3] [--max-epochs 300]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from connprobe._kernels import _HAVE_NUMBA, train_numba, train_numpy

PROBLEMS = [
    # (n_samples, n_features, n_classes)
    (2_000, 64, 3),
    (5_000, 128, 4),
    (20_000, 256, 4),
]

L2 = 1e-4
LR = 0.1


def make_problem(n: int, d: int, k: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((k, d)) * 2.0
    y = rng.integers(0, k, size=n)
    X = centers[y] + rng.standard_normal((n, d))
    return X, y.astype(np.int64)


def best_of(fn, repeats: int) -> tuple[float, tuple]:
    best = np.inf
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3, help="keep the best wall time of this many runs")
    parser.add_argument("--max-epochs", type=int, default=300)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if not _HAVE_NUMBA:
        print("numba is not importable; nothing to compare")
        return 1

    # first call includes JIT compilation; pay it outside the timed region
    Xw, yw = make_problem(64, 8, 2, seed=args.seed)
    start = time.perf_counter()
    train_numba(Xw, yw, 2, L2, LR, 5, 0.0)
    print(f"jit warmup (compile + tiny run): {time.perf_counter() - start:.2f} s\n")

    header = f"{'problem':>18} {'epochs':>6} {'numpy s':>9} {'numba s':>9} {'speedup':>8} {'max |dW|':>10}"
    print(header)
    print("-" * len(header))
    for n, d, k in PROBLEMS:
        X, y = make_problem(n, d, k, seed=args.seed)
        t_np, res_np = best_of(lambda: train_numpy(X, y, k, L2, LR, args.max_epochs, 0.0), args.repeats)
        t_nb, res_nb = best_of(lambda: train_numba(X, y, k, L2, LR, args.max_epochs, 0.0), args.repeats)
        drift = float(np.max(np.abs(res_np[0] - res_nb[0])))
        label = f"n={n} d={d} k={k}"
        print(f"{label:>18} {res_np[2]:>6d} {t_np:>9.3f} {t_nb:>9.3f} {t_np / t_nb:>7.2f}x {drift:>10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
