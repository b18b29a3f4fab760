"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--digits N] [--repeat R]

Prints one line per kernel with the best-of-R wall time for each backend.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from adicmean import _kernels_py

try:
    from adicmean import _kernels as compiled
except ImportError:
    compiled = None


def cases(n: int):
    rng = np.random.default_rng(0)
    digits = rng.integers(0, 4, n, dtype=np.uint8)
    positions = np.unique(np.geomspace(1, n, 200).astype(np.int64))
    ascii_buf = (digits + 48).tobytes()
    packed = _kernels_py.pack2(digits)
    points = rng.integers(0, 4, (n // 10, 10), dtype=np.uint8)
    return {
        "checkpoint_counts": lambda m: m.checkpoint_counts(digits, 4, positions),
        "parse_ascii": lambda m: m.parse_ascii(ascii_buf, 4),
        "pack2": lambda m: m.pack2(digits),
        "unpack2": lambda m: m.unpack2(packed, n),
        "prefix_codes": lambda m: m.prefix_codes(points, 10, 4),
    }


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--digits", type=int, default=10**6)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':<18} {'numpy (ms)':>11} {'cython (ms)':>12} {'speedup':>8}")
    for name, fn in cases(args.digits).items():
        py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if compiled is None:
            print(f"{name:<18} {py:>11.2f} {'n/a':>12} {'':>8}")
            continue
        cy = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<18} {py:>11.2f} {cy:>12.2f} {py / cy:>7.1f}x")


if __name__ == "__main__":
    main()
