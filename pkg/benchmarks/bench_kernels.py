"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best time per backend and the speedup.
"""
import argparse
import timeit

import numpy as np

from almostaction import kernels


def cases(rng):
    depth = 20
    a = rng.integers(0, 1 << depth, size=200_000).astype(np.int64)
    b = a ^ rng.integers(0, 1 << 6, size=a.size).astype(np.int64)
    src = np.unique(rng.integers(0, 1 << 16, size=3000)).astype(np.int64)
    dst = np.sort(src ^ rng.integers(0, 4, size=src.size).astype(np.int64))
    cells = rng.integers(0, 1 << 10, size=100_000).astype(np.int64)
    img = rng.permutation(1 << 10).astype(np.int64)[cells]
    perms = np.stack([rng.permutation(1 << 4) for _ in range(64)]).astype(np.int64)
    anchors = (np.arange(1 << 10, dtype=np.int64) << 6)
    xs = rng.integers(0, 1 << 16, size=64).astype(np.int64)
    return {
        "max_xor_bitlen": lambda k: k.max_xor_bitlen(a, b),
        "greedy_match": lambda k: k.greedy_match(src, dst),
        "cell_map": lambda k: k.cell_map(cells, img, 1 << 10),
        "trace_search": lambda k: k.trace_search(anchors, perms, xs, 12, 0),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    names = sorted(kernels.BACKENDS)
    print(f"{'kernel':<16}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}")
    for kernel, fn in cases(rng).items():
        best = {}
        for name in names:
            impl = kernels.BACKENDS[name]
            best[name] = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat))
        speed = best["python"] / best["compiled"] if "compiled" in best else float("nan")
        print(f"{kernel:<16}" + "".join(f"{best[n] * 1e3:>10.2f}ms" for n in names) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
