"""The compiled kernels and the pure-Python fallback agree exactly."""
import os
import subprocess
import sys

import numpy as np
import pytest

from ccrec import _kernels_py, kernels

compiled = pytest.importorskip("ccrec._kernels")


class TestAgreement:
    def test_fnv(self, rng):
        keys = ["", "a", "foobar", "ß∂", "item_12345"] + [str(x) for x in rng.integers(0, 10**9, 50)]
        for k in keys:
            assert compiled.fnv1a64(k) == _kernels_py.fnv1a64(k)

    def test_hash_buckets(self, rng):
        items = [f"i{x}" for x in rng.integers(0, 500, 300)]
        np.testing.assert_array_equal(compiled.hash_bucket_counts(items, 64),
                                      _kernels_py.hash_bucket_counts(items, 64))

    def test_window_labels(self, rng):
        ts = np.sort(rng.integers(0, 90 * 86400, 400)).astype(np.int64)
        np.testing.assert_array_equal(compiled.window_labels(ts, 5 * 86400),
                                      _kernels_py.window_labels(ts, 5 * 86400))

    def test_hit_counts(self, rng):
        ranked = np.full((100, 8), -1, dtype=np.int64)
        indptr = [0]
        flat = []
        for u in range(100):
            w = int(rng.integers(1, 9))
            ranked[u, :w] = rng.permutation(15)[:w]
            t = rng.choice(15, size=int(rng.integers(1, 4)), replace=False)
            flat.extend(t.tolist())
            indptr.append(len(flat))
        args = (ranked, np.asarray(indptr, dtype=np.int64), np.asarray(flat, dtype=np.int64),
                np.array([1, 3, 5, 8], dtype=np.int64))
        np.testing.assert_array_equal(compiled.hit_counts(*args), _kernels_py.hit_counts(*args))


class TestSelection:
    def test_compiled_is_default(self):
        assert kernels.BACKEND == "cython"

    def test_environment_forces_fallback(self):
        env = dict(os.environ, CCREC_PURE_PYTHON="1")
        out = subprocess.run([sys.executable, "-c", "from ccrec import kernels; print(kernels.BACKEND)"],
                             env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "python"
