# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled versions of the data kernels in ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t FNV_OFFSET = 0xCBF29CE484222325ULL
cdef uint64_t FNV_PRIME = 0x100000001B3ULL


cdef inline uint64_t _fnv(const unsigned char[:] buf) noexcept nogil:
    cdef uint64_t h = FNV_OFFSET
    cdef Py_ssize_t i
    for i in range(buf.shape[0]):
        h ^= buf[i]
        h *= FNV_PRIME
    return h


def fnv1a64(key):
    if isinstance(key, str):
        key = key.encode("utf-8")
    if len(key) == 0:
        return FNV_OFFSET
    return _fnv(key)


def hash_bucket_counts(items, Py_ssize_t dim):
    cdef cnp.ndarray[int64_t, ndim=1] counts = np.zeros(dim, dtype=np.int64)
    cdef bytes raw
    cdef uint64_t h
    for item in items:
        raw = item.encode("utf-8") if isinstance(item, str) else bytes(item)
        h = _fnv(raw) if len(raw) else FNV_OFFSET
        counts[h % <uint64_t>dim] += 1
    return counts


def window_labels(timestamps, double window_seconds):
    cdef int64_t[:] ts = np.ascontiguousarray(timestamps, dtype=np.int64)
    cdef Py_ssize_t n = ts.shape[0], i
    cdef cnp.ndarray[int64_t, ndim=1] labels = np.empty(n, dtype=np.int64)
    cdef int64_t label = -1, anchor = 0
    for i in range(n):
        if label < 0 or ts[i] - anchor > window_seconds:
            label += 1
            anchor = ts[i]
        labels[i] = label
    return labels


def hit_counts(ranked, truth_indptr, truth_indices, ks):
    cdef int64_t[:, :] r = np.ascontiguousarray(ranked, dtype=np.int64)
    cdef int64_t[:] ptr = np.ascontiguousarray(truth_indptr, dtype=np.int64)
    cdef int64_t[:] idx = np.ascontiguousarray(truth_indices, dtype=np.int64)
    cdef int64_t[:] kk = np.ascontiguousarray(ks, dtype=np.int64)
    cdef Py_ssize_t n_users = r.shape[0], width = r.shape[1]
    cdef Py_ssize_t u, j, p, q, lim
    cdef int64_t c, hits
    cdef cnp.ndarray[int64_t, ndim=2] out = np.zeros((n_users, kk.shape[0]), dtype=np.int64)
    for u in range(n_users):
        for j in range(kk.shape[0]):
            lim = kk[j] if kk[j] < width else width
            hits = 0
            for p in range(lim):
                c = r[u, p]
                if c < 0:
                    continue
                for q in range(ptr[u], ptr[u + 1]):
                    if idx[q] == c:
                        hits += 1
                        break
            out[u, j] = hits
    return out
