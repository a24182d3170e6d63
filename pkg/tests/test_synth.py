"""Synthetic archetype generator: distributions, conservation and validation."""
import numpy as np
import pytest
from scipy.stats import chi2_contingency

from ccrec.errors import ConfigError
from ccrec.synth import SyntheticSpec, category_id, intent_matrix, synth_generate, write_synthetic


def generate(**kw):
    return synth_generate(SyntheticSpec(**kw))


class TestDistributions:
    def test_histories_do_not_reveal_archetype(self):
        _, meta = generate(num_users=3000, num_categories=6, past_groups=(2, 3), seed=3)
        table = np.zeros((2, 6))
        for t in meta["users"].values():
            for c in t["past"]:
                table[t["archetype"], int(c[1:]) - 1] += 1
        assert chi2_contingency(table)[1] > 0.01

    def test_futures_depend_on_archetype(self):
        _, meta = generate(num_users=2000, num_categories=8, seed=1)
        agree = {0: 0, 1: 0}
        total = {0: 0, 1: 0}
        for t in meta["users"].values():
            a = t["archetype"]
            last = int(t["past"][-1][1:]) - 1
            nxt = int(t["future"][0][1:]) - 1
            agree[a] += (nxt - last) % 8 == 1
            total[a] += 1
        assert agree[0] / total[0] > 0.75
        assert agree[1] / total[1] < 0.1

    def test_item_clusters_are_disjoint(self):
        rows, meta = generate(num_users=200, seed=0)
        clusters = {0: set(), 1: set()}
        for r in rows:
            clusters[meta["users"][r.user_id]["archetype"]].add(r.item_id)
        assert not clusters[0] & clusters[1]

    def test_shared_clusters(self):
        rows, meta = generate(num_users=200, seed=0, shared_clusters=True)
        items = {a: {r.item_id for r in rows if meta["users"][r.user_id]["archetype"] == a}
                 for a in (0, 1)}
        assert items[0] & items[1]


class TestStructure:
    def test_group_counts_are_conserved(self):
        spec = SyntheticSpec(num_users=300, past_groups=(1, 4), future_groups=2,
                             items_per_group=(2, 2), seed=5)
        rows, meta = synth_generate(spec)
        groups = sum(len(t["past"]) + len(t["future"]) for t in meta["users"].values())
        assert len(rows) == 2 * groups
        assert all(1 <= len(t["past"]) <= 4 and len(t["future"]) == 2
                   for t in meta["users"].values())

    def test_groups_are_further_apart_than_the_window(self):
        rows, _ = generate(num_users=50, past_groups=(3, 3), seed=2)
        by_user = {}
        for r in rows:
            by_user.setdefault(r.user_id, []).append(r.timestamp)
        for ts in by_user.values():
            gaps = np.diff(ts)
            assert np.all((gaps < 5 * 86400) | (gaps > 5 * 86400))

    def test_degenerate_chain(self):
        s = 3
        hist = np.eye(s)[[1, 2, 0]].tolist()
        spec = SyntheticSpec(num_users=20, num_categories=s, num_archetypes=1,
                             initial=[1.0, 0.0, 0.0], history_transitions=hist,
                             future_transitions=[hist], past_groups=(2, 2), seed=0)
        _, meta = synth_generate(spec)
        for t in meta["users"].values():
            assert t["past"] == [category_id(0), category_id(1)]
            assert t["future"] == [category_id(2)]

    def test_deterministic(self, tmp_path):
        spec = SyntheticSpec(num_users=50, seed=9)
        a, _ = write_synthetic(spec, tmp_path / "a")
        b, _ = write_synthetic(spec, tmp_path / "b")
        assert a.read_bytes() == b.read_bytes()

    def test_intent_rows_are_distributions(self):
        m = intent_matrix(5, 2)
        np.testing.assert_allclose(m.sum(axis=1), 1.0)
        assert m[4, 1] == pytest.approx(0.85)


class TestValidation:
    @pytest.mark.parametrize("kw", [
        {"num_categories": 1},
        {"past_groups": (0, 2)},
        {"past_groups": (3, 2)},
        {"gap_days": 5.0},
        {"future_groups": 0},
        {"initial": [1.0, 0.0]},
        {"num_categories": 2, "history_transitions": [[0.5, 0.6], [0.5, 0.5]]},
    ])
    def test_rejects(self, kw):
        with pytest.raises(ConfigError):
            SyntheticSpec(**kw)
