"""Compare the compiled kernels with the pure-Python fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeat 5]``

The last block times one M1 training epoch to put the kernels in
proportion: model training is dense numpy work and the kernels only touch
data preparation and scoring.
"""
import argparse
import timeit

import numpy as np

from ccrec import _kernels_py

try:
    from ccrec import _kernels as compiled
except ImportError:
    compiled = None


def workloads(rng):
    items = [f"item_{x}" for x in rng.integers(0, 10**6, 20_000)]
    ts = np.sort(rng.integers(0, 365 * 86400, 200_000)).astype(np.int64)
    users, width = 20_000, 10
    ranked = np.stack([rng.permutation(50)[:width] for _ in range(users)]).astype(np.int64)
    sizes = rng.integers(1, 4, users)
    indptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    flat = rng.integers(0, 50, int(indptr[-1])).astype(np.int64)
    ks = np.array([1, 3, 5, 10], dtype=np.int64)
    return {
        "fnv1a64 (20k keys)": lambda m: [m.fnv1a64(s) for s in items],
        "hash_bucket_counts (20k items)": lambda m: m.hash_bucket_counts(items, 512),
        "window_labels (200k timestamps)": lambda m: m.window_labels(ts, 5 * 86400),
        "hit_counts (20k users)": lambda m: m.hit_counts(ranked, indptr, flat, ks),
    }


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def training_epoch_seconds(repeat):
    from ccrec.mle import M1Model, train_m1
    from ccrec.nn import AttentionConfig
    from ccrec.data import Record

    rng = np.random.default_rng(0)
    records = []
    for u in range(2000):
        delta = [int(c) for c in rng.integers(1, 9, 3)]
        groups = [{"category": c, "window_start": i, "profile_nonzeros": []} for i, c in enumerate(delta)]
        records.append(Record(f"u{u}", [], delta, groups, [int(rng.integers(1, 9))]))
    model = M1Model(8, AttentionConfig(64, 2, 1, None, 5), np.random.default_rng(0))
    return best_of(lambda: train_m1(model, records, 5, 1, 1e-3, 64, np.random.default_rng(0)), repeat)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':34} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for name, fn in workloads(rng).items():
        py = best_of(lambda: fn(_kernels_py), args.repeat)
        if compiled is None:
            print(f"{name:34} {py:10.4f} {'n/a':>10} {'n/a':>8}")
            continue
        cy = best_of(lambda: fn(compiled), args.repeat)
        print(f"{name:34} {py:10.4f} {cy:10.4f} {py / cy:7.1f}x")
    print(f"\none M1 training epoch (2000 users, batch 64): {training_epoch_seconds(args.repeat):.3f} s")


if __name__ == "__main__":
    main()
