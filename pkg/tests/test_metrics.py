"""HR, precision, recall and F1 at k, against a brute-force oracle."""
import json

import numpy as np
import pytest

from ccrec.data.vocab import write_records
from ccrec.errors import DataError
from ccrec.metrics import MetricReport, evaluate_run, f1_from, metrics_at_k

from .conftest import make_record


def oracle(ranked, truth, k):
    """Straight loops over sorted users; returns (hr, precision, recall)."""
    hr, p, r = [], [], []
    for u in sorted(u for u in ranked if u in truth and truth[u]):
        hits = sum(1 for c in ranked[u][:k] if c in truth[u])
        hr.append(1.0 if hits else 0.0)
        p.append(hits / k)
        r.append(hits / len(truth[u]))
    return float(np.mean(hr)), float(np.mean(p)), float(np.mean(r))


def random_instance(rng, n_users=1000, n_cats=12):
    ranked, truth = {}, {}
    for u in range(n_users):
        width = int(rng.integers(1, n_cats + 1))
        ranked[f"u{u}"] = [int(c) for c in rng.permutation(n_cats)[:width]]
        size = int(rng.integers(0, 4))
        truth[f"u{u}"] = {int(c) for c in rng.choice(n_cats, size=size, replace=False)}
    return ranked, truth


class TestF1:
    def test_aggregate_identity(self):
        assert abs(f1_from(0.1803, 0.3427) - 0.2363) <= 5e-5

    def test_zero(self):
        assert f1_from(0.0, 0.0) == 0.0


class TestExamples:
    def test_single_user(self):
        rep = metrics_at_k({"u": [3, 7, 1]}, {"u": {7, 9}}, ks=(1, 3))
        assert rep.hr == {1: 0.0, 3: 1.0}
        assert rep.precision[3] == pytest.approx(1 / 3)
        assert rep.recall[3] == pytest.approx(0.5)
        assert rep.f1[3] == pytest.approx(f1_from(1 / 3, 0.5))

    def test_empty_truth_is_excluded(self):
        rep = metrics_at_k({"a": [1], "b": [2]}, {"a": {1}, "b": set()}, ks=(1,))
        assert rep.users == 1 and rep.excluded == 1
        assert rep.hr[1] == 1.0

    def test_short_list(self):
        rep = metrics_at_k({"u": [4]}, {"u": {4}}, ks=(3,))
        assert rep.precision[3] == pytest.approx(1 / 3)
        assert rep.recall[3] == 1.0

    def test_duplicates_rejected(self):
        with pytest.raises(DataError):
            metrics_at_k({"u": [1, 1]}, {"u": {1}})


class TestOracle:
    def test_random_instances_match_exactly(self, rng):
        ranked, truth = random_instance(rng)
        ks = (1, 2, 3, 5, 8)
        rep = metrics_at_k(ranked, truth, ks)
        for k in ks:
            hr, p, r = oracle(ranked, truth, k)
            assert (rep.hr[k], rep.precision[k], rep.recall[k]) == (hr, p, r)

    def test_per_user_hits_match_exactly(self, rng):
        ranked, truth = random_instance(rng)
        rep = metrics_at_k(ranked, truth, (1, 3, 5), keep_per_user=True)
        for row in rep.per_user:
            u = row["user"]
            for k in (1, 3, 5):
                assert row[f"hits@{k}"] == sum(1 for c in ranked[u][:k] if c in truth[u])

    def test_invariants(self, rng):
        ranked, truth = random_instance(rng)
        ks = tuple(range(1, 13))
        rep = metrics_at_k(ranked, truth, ks)
        assert rep.precision[1] == rep.hr[1]
        for k in ks:
            assert rep.recall[k] <= rep.hr[k]
        for a, b in zip(ks, ks[1:]):
            assert rep.hr[a] <= rep.hr[b]
            assert rep.recall[a] <= rep.recall[b]

    def test_user_order_does_not_matter(self, rng):
        ranked, truth = random_instance(rng, n_users=200)
        keys = list(ranked)
        rng.shuffle(keys)
        shuffled = {u: ranked[u] for u in keys}
        assert metrics_at_k(ranked, truth).to_json() == metrics_at_k(shuffled, truth).to_json()


class TestEvaluateRun:
    def write(self, tmp_path, rows, records):
        pred = tmp_path / "pred.tsv"
        pred.write_text("".join(f"{u}\t{rank}\t{c}\t0.5\t0.5\n" for u, rank, c in rows))
        ex = tmp_path / "test.jsonl"
        write_records(ex, records)
        return pred, ex

    def test_join_and_round_trip(self, tmp_path):
        pred, ex = self.write(tmp_path, [("a", 1, "2"), ("a", 2, "3"), ("b", 1, "1")],
                              [make_record("a", [1], [3]), make_record("b", [1], [2]),
                               make_record("c", [1], [2])])
        rep = evaluate_run(pred, ex, ks=(1, 3), output_path=tmp_path / "report.json")
        assert rep.users == 2 and rep.missing == 1
        assert rep.hr == {1: 0.0, 3: 0.5}
        back = MetricReport.from_json(json.loads((tmp_path / "report.json").read_text()))
        assert back.to_json() == rep.to_json()
        assert (tmp_path / "report.txt").read_text().startswith("HR@1 | HR@3 | Precision@3")

    def test_duplicate_user(self, tmp_path):
        pred, ex = self.write(tmp_path, [("a", 1, "2"), ("a", 1, "3")], [make_record("a", [1], [3])])
        with pytest.raises(DataError):
            evaluate_run(pred, ex)

    def test_rank_order_is_respected(self, tmp_path):
        pred, ex = self.write(tmp_path, [("a", 2, "3"), ("a", 1, "2")], [make_record("a", [1], [2])])
        assert evaluate_run(pred, ex, ks=(1,)).hr[1] == 1.0
