"""Synthetic interaction logs with user archetypes.

Archetypes share one history chain, so their past category sequences are
drawn from the same distribution, but each archetype buys from its own item
cluster inside every category and has its own next-category intent.  Only
the item level therefore tells two users with identical category histories
apart.  The default of one past group per user is the cold-start case where
that ambiguity is strongest.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data.interactions import Interaction, write_canonical
from .errors import ConfigError

DAY = 86400
T0 = 1_600_000_000


@dataclass
class SyntheticSpec:
    num_users: int = 2000
    num_categories: int = 8
    num_archetypes: int = 2
    items_per_category: int = 6
    past_groups: tuple = (1, 1)
    future_groups: int = 1
    items_per_group: tuple = (1, 3)
    gap_days: float = 7.0
    seed: int = 0
    initial: list | None = None
    history_transitions: list | None = None
    future_transitions: list | None = None
    shared_clusters: bool = False

    def __post_init__(self):
        s, a = self.num_categories, self.num_archetypes
        if s < 2 or a < 1 or self.num_users < 1:
            raise ConfigError("synthetic spec needs >= 2 categories, >= 1 archetype and users")
        if self.initial is None:
            self.initial = [1.0 / s] * s
        if self.history_transitions is None:
            self.history_transitions = np.full((s, s), 1.0 / s).tolist()
        if self.future_transitions is None:
            self.future_transitions = [intent_matrix(s, shift_for(i, s, a)).tolist()
                                       for i in range(a)]
        self.past_groups = tuple(self.past_groups)
        self.items_per_group = tuple(self.items_per_group)
        self.validate()

    def validate(self):
        s = self.num_categories
        init = np.asarray(self.initial, dtype=float)
        hist = np.asarray(self.history_transitions, dtype=float)
        fut = np.asarray(self.future_transitions, dtype=float)
        if init.shape != (s,) or hist.shape != (s, s) or fut.shape != (self.num_archetypes, s, s):
            raise ConfigError("transition shapes do not match num_categories / num_archetypes")
        for name, m in (("initial", init), ("history", hist), ("future", fut)):
            if np.any(m < 0) or not np.allclose(m.sum(axis=-1), 1.0):
                raise ConfigError(f"{name} transition rows must be probability vectors")
        lo, hi = self.past_groups
        if not 1 <= lo <= hi:
            raise ConfigError("past_groups must be an increasing range starting at >= 1")
        if self.future_groups < 1 or self.items_per_group[0] < 1:
            raise ConfigError("future_groups and items_per_group must be >= 1")
        if self.gap_days <= 5.0:
            raise ConfigError("gap_days must exceed the 5-day grouping window")

    def to_json(self):
        d = asdict(self)
        d["past_groups"] = list(self.past_groups)
        d["items_per_group"] = list(self.items_per_group)
        return d


def shift_for(archetype, s, a):
    return 1 + archetype * max(s // a, 1)


def intent_matrix(s, shift, strength=0.85):
    """Row c puts ``strength`` on c+shift (mod s), the rest spread evenly."""
    m = np.full((s, s), (1.0 - strength) / (s - 1))
    for c in range(s):
        m[c, (c + shift) % s] = strength
    return m


def category_id(c):
    return f"c{c + 1:03d}"


def item_id(c, cluster, j):
    return f"i{c + 1:03d}_{cluster}_{j}"


def synth_generate(spec: SyntheticSpec):
    """Returns (interactions sorted by user/time, truth metadata dict)."""
    rng = np.random.default_rng(spec.seed)
    s = spec.num_categories
    init = np.asarray(spec.initial)
    hist = np.asarray(spec.history_transitions)
    fut = np.asarray(spec.future_transitions)
    width = len(str(spec.num_users - 1))
    rows = []
    truth = {}
    for u in range(spec.num_users):
        user = f"u{u:0{width}d}"
        arche = int(rng.integers(spec.num_archetypes))
        cluster = 0 if spec.shared_clusters else arche
        n_past = int(rng.integers(spec.past_groups[0], spec.past_groups[1] + 1))
        cats = [int(rng.choice(s, p=init))]
        for _ in range(n_past - 1):
            cats.append(int(rng.choice(s, p=hist[cats[-1]])))
        future = []
        prev = cats[-1]
        for _ in range(spec.future_groups):
            prev = int(rng.choice(s, p=fut[arche, prev]))
            future.append(prev)
        start = T0 + int(rng.integers(0, 30 * DAY))
        for g, c in enumerate(cats + future):
            t_group = start + int(round(g * spec.gap_days * DAY))
            n_items = int(rng.integers(spec.items_per_group[0], spec.items_per_group[1] + 1))
            for m in range(n_items):
                j = int(rng.integers(spec.items_per_category))
                rows.append(Interaction(user, item_id(c, cluster, j), category_id(c),
                                        t_group + 3600 * m))
        truth[user] = {"archetype": arche, "past": [category_id(c) for c in cats],
                       "future": [category_id(c) for c in future]}
    rows.sort(key=lambda x: (x.user_id, x.timestamp, x.category_id, x.item_id))
    return rows, {"spec": spec.to_json(), "users": truth}


def write_synthetic(spec: SyntheticSpec, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, meta = synth_generate(spec)
    write_canonical(out_dir / "interactions.tsv", rows)
    (out_dir / "truth.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return out_dir / "interactions.tsv", meta
