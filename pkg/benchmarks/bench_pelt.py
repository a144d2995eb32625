"""Time the compiled PELT kernel against the pure-Python fallback.

    python3 benchmarks/bench_pelt.py [--sizes 500 1000 2000 4000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from gestseq import _pelt_py
from gestseq.segmentation import resolve_gamma

try:
    from gestseq import _pelt_ext
except ImportError:
    _pelt_ext = None


def stream(n, k=10, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.repeat(rng.integers(0, k, size=n // 12 + 1), 12)[:n]
    logits = np.eye(k)[labels] / 0.5 + rng.normal(0, 0.05, (n, k))
    p = np.exp(logits - logits.max(axis=1, keepdims=True))
    return p / p.sum(axis=1, keepdims=True)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 1000, 2000, 4000])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--penalty", type=float, default=0.5)
    args = ap.parse_args()
    print(f"{'n':>6} {'python (s)':>11} {'cython (s)':>11} {'speedup':>8}  same")
    for n in args.sizes:
        Y = stream(n)
        g = resolve_gamma(Y)
        tp, rp = best_of(lambda: _pelt_py.pelt_rbf(Y, g, args.penalty, 2), args.repeat)
        if _pelt_ext is None:
            print(f"{n:>6} {tp:>11.4f} {'n/a':>11} {'n/a':>8}  -")
            continue
        tc, rc = best_of(lambda: _pelt_ext.pelt_rbf(Y, g, args.penalty, 2), args.repeat)
        print(f"{n:>6} {tp:>11.4f} {tc:>11.4f} {tp / tc:>7.1f}x  {rp[0] == rc[0]}")


if __name__ == "__main__":
    main()
