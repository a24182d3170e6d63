"""Hit ratio, precision, recall and F1 at k for ranked category lists."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .data.vocab import read_records
from .errors import DataError


def f1_from(precision, recall):
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass
class MetricReport:
    ks: list
    hr: dict
    precision: dict
    recall: dict
    f1: dict
    users: int
    excluded: int = 0
    missing: int = 0
    per_user: list = field(default_factory=list)

    def to_json(self):
        out = {str(k): {"hr": self.hr[k], "precision": self.precision[k],
                        "recall": self.recall[k], "f1": self.f1[k]} for k in self.ks}
        out["users"] = self.users
        out["excluded"] = self.excluded
        if self.missing:
            out["missing"] = self.missing
        return out

    def dumps(self):
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, d):
        ks = sorted(int(k) for k in d if k.isdigit())
        return cls(ks,
                   {k: d[str(k)]["hr"] for k in ks},
                   {k: d[str(k)]["precision"] for k in ks},
                   {k: d[str(k)]["recall"] for k in ks},
                   {k: d[str(k)]["f1"] for k in ks},
                   d["users"], d.get("excluded", 0), d.get("missing", 0))

    def table(self):
        """Plain-text table: HR@k, Precision@k (k > 1), Recall@k, F1@k."""
        cols = [(f"HR@{k}", self.hr[k]) for k in self.ks]
        cols += [(f"Precision@{k}", self.precision[k]) for k in self.ks if k > 1]
        cols += [(f"Recall@{k}", self.recall[k]) for k in self.ks]
        cols += [(f"F1@{k}", self.f1[k]) for k in self.ks]
        head = " | ".join(name for name, _ in cols)
        row = " | ".join(f"{v:.4f}".rjust(len(name)) for name, v in cols)
        return f"{head}\n{row}\nusers={self.users} excluded={self.excluded}\n"


def metrics_at_k(ranked, truth, ks=(1, 3, 5), keep_per_user=False):
    """Aggregate metrics over users present in both mappings.

    ``ranked`` maps user -> deduplicated ranked list; ``truth`` maps
    user -> set of relevant items.  Users whose truth set is empty are
    excluded and counted.  F1@k is computed from the aggregated precision
    and recall, not averaged per user.
    """
    ks = sorted(int(k) for k in ks)
    users, excluded = [], 0
    for u in ranked:
        if u not in truth:
            continue
        if not truth[u]:
            excluded += 1
            continue
        users.append(u)
    users.sort()
    # dense ids so the kernel works on integers
    vocab = {}
    width = max((len(ranked[u]) for u in users), default=0)
    mat = np.full((len(users), max(width, 1)), -1, dtype=np.int64)
    indptr = np.zeros(len(users) + 1, dtype=np.int64)
    flat = []
    sizes = np.zeros(len(users), dtype=np.float64)
    for i, u in enumerate(users):
        row = ranked[u]
        if len(set(row)) != len(row):
            raise DataError(f"duplicate entries in ranked list of user {u}")
        mat[i, :len(row)] = [vocab.setdefault(x, len(vocab)) for x in row]
        t = [vocab.setdefault(x, len(vocab)) for x in truth[u]]
        flat.extend(t)
        indptr[i + 1] = len(flat)
        sizes[i] = len(set(truth[u]))
    hits = kernels.hit_counts(mat, indptr, np.asarray(flat, dtype=np.int64), np.asarray(ks, dtype=np.int64))
    n = len(users)
    hr, prec, rec, f1 = {}, {}, {}, {}
    for j, k in enumerate(ks):
        h = hits[:, j].astype(np.float64)
        if n:
            hr[k] = float(np.mean(h >= 1))
            prec[k] = float(np.mean(h / k))
            rec[k] = float(np.mean(h / sizes))
        else:
            hr[k] = prec[k] = rec[k] = 0.0
        f1[k] = f1_from(prec[k], rec[k])
    per_user = []
    if keep_per_user:
        per_user = [{"user": u, **{f"hits@{k}": int(hits[i, j]) for j, k in enumerate(ks)}}
                    for i, u in enumerate(users)]
    return MetricReport(ks, hr, prec, rec, f1, n, excluded, per_user=per_user)


def evaluate_run(prediction_file, example_file, ks=(1, 3, 5), output_path=None, vocab=None):
    """Join a prediction export with the example file and score it.

    Example targets are category indices; ``vocab`` maps them back to the
    ids used in the prediction file (indices are compared as strings
    otherwise).
    """
    preds = {}
    with open(prediction_file, encoding="utf-8", newline="") as fh:
        seen_first = {}
        for line in csv.reader(fh, delimiter="\t"):
            if not line:
                continue
            user, rank = line[0], int(line[1])
            if rank == 1:
                if user in seen_first:
                    raise DataError(f"duplicate user {user} in predictions")
                seen_first[user] = True
            preds.setdefault(user, []).append((rank, line[2]))
    ranked = {u: [c for _, c in sorted(v)] for u, v in preds.items()}
    truth = {}
    for r in read_records(example_file):
        if vocab is not None:
            truth[r.user] = {vocab.category(c) for c in r.gamma}
        else:
            truth[r.user] = {str(c) for c in r.gamma}
    missing = sum(1 for u in truth if u not in ranked)
    report = metrics_at_k(ranked, truth, ks)
    report.missing = missing
    if output_path is not None:
        output_path = Path(output_path)
        output_path.write_text(report.dumps())
        output_path.with_suffix(".txt").write_text(report.table())
    return report
