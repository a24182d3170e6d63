"""Past/future partitioning of each user's group timeline."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from itertools import groupby

import numpy as np

from ..errors import ConfigError
from .grouping import CategoryGroup


@dataclass(frozen=True)
class SplitPolicy:
    """How to cut each timeline into past and future.

    Exactly one of ``cutoff`` (unix seconds; events at the cutoff count as
    past) or ``leave_last`` (number of trailing groups used as future) must
    be set.  ``test_max_past`` caps the past of held-out users separately,
    which is how cold-start evaluation sets are produced.
    """

    cutoff: int | None = None
    leave_last: int | None = None
    max_past: int | None = None
    max_future: int | None = None
    test_fraction: float = 0.1
    user_holdout: bool = True
    test_max_past: int | None = None
    seed: int = 0

    def validate(self):
        if (self.cutoff is None) == (self.leave_last is None):
            raise ConfigError("split policy needs exactly one of cutoff or leave_last")
        if self.leave_last is not None and self.leave_last < 1:
            raise ConfigError("leave_last must be >= 1")
        for name in ("max_past", "max_future", "test_max_past"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0.0 <= self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in [0, 1)")
        return self


@dataclass
class UserExample:
    user_id: str
    past: list
    future: list
    f: tuple = ()

    @property
    def pi_t(self):
        return [i for g in self.past for i in g.item_ids]

    @property
    def delta_t(self):
        return [g.category_id for g in self.past]

    @property
    def gamma_t(self):
        return sorted({g.category_id for g in self.future})


@dataclass
class SplitResult:
    train: list
    test: list
    stats: Counter = field(default_factory=Counter)


def _split_at_cutoff(groups, cutoff):
    past, future = [], []
    for g in groups:
        pre = [(i, t) for i, t in zip(g.item_ids, g.timestamps) if t <= cutoff]
        post = [(i, t) for i, t in zip(g.item_ids, g.timestamps) if t > cutoff]
        if pre:
            past.append(replace(g, item_ids=tuple(i for i, _ in pre),
                                timestamps=tuple(t for _, t in pre)))
        if post:
            future.append(replace(g, window_start=post[0][1],
                                  item_ids=tuple(i for i, _ in post),
                                  timestamps=tuple(t for _, t in post)))
    return past, future


def _split_leave_last(groups, n):
    if len(groups) <= n:
        return [], list(groups)
    future = list(groups[-n:])
    first_future = min(g.timestamps[0] for g in future)
    # past groups whose span reaches into the future window would leak
    past = [g for g in groups[:-n] if g.last_timestamp < first_future]
    return past, future


def partition_user(groups, policy: SplitPolicy, max_past=None):
    if policy.cutoff is not None:
        past, future = _split_at_cutoff(groups, policy.cutoff)
    else:
        past, future = _split_leave_last(groups, policy.leave_last)
    cap = max_past if max_past is not None else policy.max_past
    if cap is not None:
        past = past[-cap:]
    if policy.max_future is not None:
        future = future[:policy.max_future]
    return past, future


def test_user_set(user_ids, policy: SplitPolicy):
    users = sorted(user_ids)
    n_test = int(round(len(users) * policy.test_fraction))
    if n_test == 0:
        return set()
    order = np.random.default_rng(policy.seed).permutation(len(users))
    return {users[i] for i in order[:n_test]}


def split_examples(groups, policy: SplitPolicy, features=None):
    """Partition grouped timelines into train and test ``UserExample`` lists.

    ``groups`` must be ordered by (user, window_start, category) as produced
    by ``group_category_interactions``.
    """
    policy.validate()
    features = features or {}
    by_user = {u: list(gs) for u, gs in groupby(groups, key=lambda g: g.user_id)}
    test_users = test_user_set(by_user, policy)
    stats = Counter()
    train, test = [], []
    for user in sorted(by_user):
        f = tuple(features.get(user, ()))
        is_test = user in test_users
        if not is_test or not policy.user_holdout:
            past, future = partition_user(by_user[user], policy)
            if past and future:
                train.append(UserExample(user, past, future, f))
            else:
                stats["dropped_train_empty_past" if not past else "dropped_train_empty_future"] += 1
        if is_test:
            cap = policy.test_max_past if policy.test_max_past is not None else policy.max_past
            past, future = partition_user(by_user[user], policy, max_past=cap)
            if past and future:
                test.append(UserExample(user, past, future, f))
            else:
                stats["dropped_test_empty_past" if not past else "dropped_test_empty_future"] += 1
    stats["train"] = len(train)
    stats["test"] = len(test)
    return SplitResult(train, test, stats)


def leakage_violations(examples):
    """Users whose latest past timestamp is not before their earliest future one."""
    bad = []
    for ex in examples:
        last_past = max(t for g in ex.past for t in g.timestamps)
        first_future = min(t for g in ex.future for t in g.timestamps)
        if not last_past < first_future:
            bad.append(ex.user_id)
    return bad


__all__ = ["CategoryGroup", "SplitPolicy", "UserExample", "SplitResult", "split_examples",
           "leakage_violations", "partition_user"]
