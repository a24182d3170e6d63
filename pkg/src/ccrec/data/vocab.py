"""Category vocabulary, user-feature schema and example encoding."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError
from .grouping import build_item_profile, profile_nonzeros

PAD = 0


@dataclass
class FeatureSchema:
    """Ordered user-feature fields.

    Each field is ``{"name", "kind": "categorical", "values": [...]}`` (one-hot)
    or ``{"name", "kind": "numeric", "min", "max"}`` (min-max scaled).
    """

    fields: list = field(default_factory=list)

    @property
    def width(self):
        return sum(len(f["values"]) if f["kind"] == "categorical" else 1 for f in self.fields)

    @classmethod
    def fit(cls, rows, numeric=(), categorical=()):
        fields = []
        for name in categorical:
            values = sorted({str(r[name]) for r in rows if r.get(name) is not None})
            fields.append({"name": name, "kind": "categorical", "values": values})
        for name in numeric:
            vals = [float(r[name]) for r in rows if r.get(name) is not None]
            lo, hi = (min(vals), max(vals)) if vals else (0.0, 0.0)
            fields.append({"name": name, "kind": "numeric", "min": lo, "max": hi})
        return cls(fields)

    def encode(self, row):
        out = []
        for f in self.fields:
            v = row.get(f["name"])
            if f["kind"] == "categorical":
                onehot = [0.0] * len(f["values"])
                if v is not None and str(v) in f["values"]:
                    onehot[f["values"].index(str(v))] = 1.0
                out.extend(onehot)
            else:
                span = f["max"] - f["min"]
                if v is None or span <= 0:
                    out.append(0.0)
                else:
                    out.append(min(max((float(v) - f["min"]) / span, 0.0), 1.0))
        return out


@dataclass
class Vocabulary:
    categories: list
    hash_dim: int = 512
    schema: FeatureSchema = field(default_factory=FeatureSchema)

    def __post_init__(self):
        self.categories = sorted(set(self.categories))
        self._index = {c: i + 1 for i, c in enumerate(self.categories)}

    @classmethod
    def from_examples(cls, examples, hash_dim=512, schema=None):
        cats = set()
        for ex in examples:
            cats.update(g.category_id for g in ex.past)
            cats.update(g.category_id for g in ex.future)
        return cls(sorted(cats), hash_dim, schema or FeatureSchema())

    @property
    def size(self):
        return len(self.categories)

    def index(self, category_id, default=PAD):
        return self._index.get(category_id, default)

    def category(self, index):
        if not 1 <= index <= len(self.categories):
            raise DataError(f"category index {index} outside [1, {len(self.categories)}]")
        return self.categories[index - 1]

    def to_json(self):
        return {"categories": self.categories, "hash_dim": self.hash_dim,
                "features": self.schema.fields}

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path):
        d = json.loads(Path(path).read_text())
        return cls(d["categories"], d["hash_dim"], FeatureSchema(d.get("features", [])))


@dataclass
class Record:
    """One user's example in index space; the canonical example-file row."""

    user: str
    f: list
    delta: list
    groups: list
    gamma: list

    def to_json(self):
        return json.dumps({"user": self.user, "f": self.f, "delta": self.delta,
                           "groups": self.groups, "gamma": self.gamma},
                          separators=(",", ":"))

    @classmethod
    def from_json(cls, line):
        d = json.loads(line)
        return cls(d["user"], d["f"], d["delta"], d["groups"], d["gamma"])

    def group_key(self, i):
        g = self.groups[i]
        return (self.user, g["category"], g["window_start"])


def to_record(example, vocab: Vocabulary, counters=None):
    """Index an example; categories absent from ``vocab`` become PAD / are dropped."""
    counters = counters if counters is not None else Counter()
    groups, delta = [], []
    for g in example.past:
        idx = vocab.index(g.category_id)
        if idx == PAD:
            counters["unknown_past_category"] += 1
        delta.append(idx)
        prof = build_item_profile(g, vocab.hash_dim)
        groups.append({"category": idx, "window_start": g.window_start,
                       "profile_nonzeros": profile_nonzeros(prof)})
    gamma = []
    for c in example.gamma_t:
        idx = vocab.index(c)
        if idx == PAD:
            counters["unknown_target_category"] += 1
        else:
            gamma.append(idx)
    return Record(example.user_id, list(example.f), delta, groups, sorted(gamma))


@dataclass
class Encoded:
    indices: np.ndarray
    mask: np.ndarray
    targets: tuple
    positions: np.ndarray  # group index per slot, -1 at padding


def encode_delta(delta, k):
    """Keep the last ``k`` indices and left-pad with PAD."""
    tail = list(delta)[-k:] if k > 0 else []
    n = len(tail)
    idx = np.zeros(k, dtype=np.int64)
    pos = np.full(k, -1, dtype=np.int64)
    if n:
        idx[k - n:] = tail
        pos[k - n:] = np.arange(len(delta) - n, len(delta))
    mask = idx != PAD
    pos[~mask] = -1
    return idx, mask, pos


def encode_record(record: Record, k):
    idx, mask, pos = encode_delta(record.delta, k)
    return Encoded(idx, mask, tuple(record.gamma), pos)


def encode_example(example, vocab: Vocabulary, k, counters=None):
    return encode_record(to_record(example, vocab, counters), k)


def write_records(path, records):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


def read_records(path):
    with open(path, encoding="utf-8") as fh:
        return [Record.from_json(line) for line in fh if line.strip()]
