"""Benchmark the jitted kernels against the pure-numpy fallbacks.

Runs every kernel on inputs shaped like the standing desk build (a level-3
quotient: 65536 left clusters x 128 right clusters) and on the mid-size
verification workloads, and prints a per-kernel timing table.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from deltareg import _kernels as K


def make_inputs():
    rng = np.random.default_rng(0)
    rows_big = rng.integers(0, 1 << 63, size=(128, 1024), dtype=np.int64).astype(np.uint64)
    pairs = np.array([(a, b) for a in range(128) for b in range(a + 1, 128)], dtype=np.int64)
    seg_starts = np.arange(0, 1024, 4, dtype=np.int64)
    seg_ends = seg_starts + 4
    mask = rng.integers(0, 1 << 63, size=1024, dtype=np.int64).astype(np.uint64)
    rows_tall = rng.integers(0, 1 << 63, size=(65536, 2), dtype=np.int64).astype(np.uint64)
    n = 60
    words = (n + 63) // 64
    tri = []
    for _ in range(3):
        m = np.zeros((n, words), dtype=np.uint64)
        for u in range(n):
            for v in range(n):
                if rng.random() < 0.25:
                    m[u, v >> 6] |= np.uint64(1) << np.uint64(v & 63)
        tri.append(m)
    sub_rows = np.zeros((10, 1), dtype=np.uint64)
    for u in range(10):
        for v in range(10):
            if rng.random() < 0.5:
                sub_rows[u, 0] |= np.uint64(1) << np.uint64(v)
    e_total = int(K.popcount_rows_np(sub_rows).sum())
    return {
        "popcount_rows": (rows_tall,),
        "and_popcount_pairs": (rows_big, pairs),
        "xor_popcount_pairs": (rows_big, pairs),
        "and_popcount_pairs_segmented": (rows_big, pairs, seg_starts, seg_ends),
        "masked_degrees": (rows_tall, rows_tall[0]),
        "triangle_count": (tri[0], tri[1], tri[2], n),
        "subset_min_edges": (sub_rows, 10, 5, 5, e_total, 1, 2),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    inputs = make_inputs()
    impl_names = sorted(K.IMPLS)
    print(f"{'kernel':32s} " + " ".join(f"{n:>12s}" for n in impl_names) + f" {'speedup':>9s}")
    for kernel, data in inputs.items():
        times = {}
        for name in impl_names:
            fn = K.IMPLS[name][kernel]
            fn(*data)  # warm (jit compile / cache)
            times[name] = min(timeit.repeat(lambda: fn(*data), number=1, repeat=args.repeat))
        cols = " ".join(f"{times[n]*1e3:9.2f} ms" for n in impl_names)
        speed = times.get("numpy", float("nan")) / times.get("numba", times["numpy"])
        print(f"{kernel:32s} {cols} {speed:8.1f}x")


if __name__ == "__main__":
    main()
