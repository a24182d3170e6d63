"""Pure-Python implementations of the hot data kernels.

These are the reference versions; ``_kernels.pyx`` must agree with them
bit for bit.
"""
import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(key):
    """64-bit FNV-1a hash of ``key`` (str is UTF-8 encoded)."""
    if isinstance(key, str):
        key = key.encode("utf-8")
    h = FNV_OFFSET
    for b in key:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


def hash_bucket_counts(items, dim):
    counts = np.zeros(dim, dtype=np.int64)
    for item in items:
        counts[fnv1a64(item) % dim] += 1
    return counts


def window_labels(timestamps, window_seconds):
    """Greedy anchored windowing over an ascending timestamp array.

    Returns one group label per timestamp; a new group opens whenever the
    gap to the current anchor exceeds ``window_seconds``.
    """
    n = len(timestamps)
    labels = np.empty(n, dtype=np.int64)
    label = -1
    anchor = 0
    for i in range(n):
        t = int(timestamps[i])
        if label < 0 or t - anchor > window_seconds:
            label += 1
            anchor = t
        labels[i] = label
    return labels


def hit_counts(ranked, truth_indptr, truth_indices, ks):
    """Per-user |top-k ∩ truth| for each k.

    ``ranked`` is an int64 [users x width] matrix padded with -1; truth sets
    are given in CSR form.
    """
    n_users = ranked.shape[0]
    out = np.zeros((n_users, len(ks)), dtype=np.int64)
    for u in range(n_users):
        truth = set(truth_indices[truth_indptr[u]:truth_indptr[u + 1]].tolist())
        row = ranked[u]
        for j, k in enumerate(ks):
            hits = 0
            for c in row[:k]:
                if c >= 0 and int(c) in truth:
                    hits += 1
            out[u, j] = hits
    return out
