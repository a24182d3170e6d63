"""Time-window grouping of same-category interactions, and item profiles."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import groupby

import numpy as np

from .. import kernels
from .interactions import Interaction

DAY = 86400


@dataclass(frozen=True)
class CategoryGroup:
    user_id: str
    category_id: str
    window_start: int
    item_ids: tuple
    timestamps: tuple

    @property
    def size(self):
        return len(self.item_ids)

    @property
    def last_timestamp(self):
        return self.timestamps[-1] if self.timestamps else self.window_start

    def interactions(self):
        return [Interaction(self.user_id, i, self.category_id, t)
                for i, t in zip(self.item_ids, self.timestamps)]


def group_order(g: CategoryGroup):
    return (g.user_id, g.window_start, g.category_id)


def _gap_labels(ts, window_seconds):
    labels = np.zeros(len(ts), dtype=np.int64)
    for i in range(1, len(ts)):
        labels[i] = labels[i - 1] + (ts[i] - ts[i - 1] > window_seconds)
    return labels


def group_category_interactions(events, window_days=5.0, semantics="anchor"):
    """Merge each user's same-category events falling in one time window.

    ``events`` must be sorted by (user, timestamp).  Under ``anchor``
    semantics a window opens at its first event and admits later events at
    most ``window_days`` after it; ``gap`` instead chains events whose
    consecutive gap is within the window.  Groups come back ordered by
    (user, window_start, category).
    """
    window_seconds = float(window_days) * DAY
    out = []
    for user, user_events in groupby(events, key=lambda x: x.user_id):
        by_cat = {}
        for x in user_events:
            by_cat.setdefault(x.category_id, []).append(x)
        for cat, xs in by_cat.items():
            xs.sort(key=lambda x: (x.timestamp, x.item_id))
            ts = np.fromiter((x.timestamp for x in xs), dtype=np.int64, count=len(xs))
            if semantics == "anchor":
                labels = kernels.window_labels(ts, window_seconds)
            elif semantics == "gap":
                labels = _gap_labels(ts, window_seconds)
            else:
                raise ValueError(f"unknown window semantics {semantics!r}")
            start = 0
            for i in range(1, len(xs) + 1):
                if i == len(xs) or labels[i] != labels[start]:
                    members = xs[start:i]
                    out.append(CategoryGroup(
                        user, cat, members[0].timestamp,
                        tuple(m.item_id for m in members),
                        tuple(m.timestamp for m in members)))
                    start = i
    out.sort(key=group_order)
    return out


def build_item_profile(group, dim):
    """Hashed item-count vector of length ``dim`` for one group."""
    if dim < 1:
        raise ValueError("hash dimension must be >= 1")
    items = group.item_ids if isinstance(group, CategoryGroup) else group
    return kernels.hash_bucket_counts(list(items), dim)


def profile_nonzeros(profile):
    nz = np.flatnonzero(profile)
    return [[int(b), int(profile[b])] for b in nz]
