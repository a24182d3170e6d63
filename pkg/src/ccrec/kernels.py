"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when
``CCREC_PURE_PYTHON=1`` is set, the pure-Python fallback is used.
"""
import os

from . import _kernels_py

if os.environ.get("CCREC_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

fnv1a64 = _impl.fnv1a64
hash_bucket_counts = _impl.hash_bucket_counts
window_labels = _impl.window_labels
hit_counts = _impl.hit_counts

__all__ = ["BACKEND", "fnv1a64", "hash_bucket_counts", "window_labels", "hit_counts"]
