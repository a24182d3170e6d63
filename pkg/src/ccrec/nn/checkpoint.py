"""Tensor container: a JSON manifest plus a little-endian float32 blob.

Manifest entries carry ``offset`` and ``length`` in bytes into the blob.
"""
import json
from pathlib import Path

import numpy as np

from ..errors import DataError

_LE_F32 = np.dtype("<f4")


def _blob_path(manifest_path):
    manifest_path = Path(manifest_path)
    return manifest_path.with_name(manifest_path.name.removesuffix(".json") + ".bin")


def save_tensors(manifest_path, tensors, meta=None):
    """Write ``tensors`` (name -> array, insertion order kept) to disk."""
    manifest_path = Path(manifest_path)
    blob = _blob_path(manifest_path)
    entries = []
    offset = 0
    with open(blob, "wb") as fh:
        for name, arr in tensors.items():
            data = np.ascontiguousarray(arr, dtype=_LE_F32)
            raw = data.tobytes()
            fh.write(raw)
            entries.append({"name": name, "shape": list(data.shape), "dtype": "f32",
                            "offset": offset, "length": len(raw)})
            offset += len(raw)
    manifest = {"blob": blob.name, "tensors": entries}
    if meta:
        manifest["meta"] = meta
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest_path


def load_tensors(manifest_path):
    """Returns (dict name -> float32 array, meta dict)."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    raw = (manifest_path.parent / manifest["blob"]).read_bytes()
    out = {}
    for e in manifest["tensors"]:
        if e["dtype"] != "f32":
            raise DataError(f"unsupported dtype {e['dtype']}")
        chunk = raw[e["offset"]:e["offset"] + e["length"]]
        if len(chunk) != e["length"]:
            raise DataError(f"blob truncated at tensor {e['name']}")
        out[e["name"]] = np.frombuffer(chunk, dtype=_LE_F32).astype(np.float32).reshape(e["shape"])
    return out, manifest.get("meta", {})


def save_module(manifest_path, module, meta=None):
    return save_tensors(manifest_path, module.state_dict(), meta)


def load_module(manifest_path, module):
    tensors, meta = load_tensors(manifest_path)
    module.load_state_dict(tensors)
    return meta
