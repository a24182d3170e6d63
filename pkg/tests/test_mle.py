"""M1 forward pass, MLE loss, candidate generation and training."""
import logging

import numpy as np
import pytest

from ccrec.errors import EmptySequenceError, TargetError
from ccrec.mle import (
    CandidateList,
    M1Model,
    forward_m1,
    generate_candidates,
    loss_mle,
    predict_logp,
    train_m1,
)
from ccrec.nn import AttentionConfig, check_gradients

from .conftest import make_record

CFG = AttentionConfig(model_dim=16, num_heads=2, num_layers=1, max_seq_len=4)


def model(num_categories=5, seed=0, **kw):
    return M1Model(num_categories, CFG, np.random.default_rng(seed), **kw)


class TestForward:
    def test_normalized(self, rng):
        m = model()
        idx = rng.integers(0, 6, size=(20, 4))
        idx[:, -1] = rng.integers(1, 6, size=20)
        logp = m.predict(idx, idx > 0)
        np.testing.assert_allclose(np.exp(logp.astype(np.float64)).sum(axis=1), 1.0, atol=1e-6)
        assert logp.shape == (20, 5)

    def test_zero_output_layer_is_uniform(self):
        m = model()
        m.fc2.weight.value[:] = 0.0
        out = forward_m1(m, [0, 0, 3, 1], [False, False, True, True])
        np.testing.assert_allclose(out, np.log(1 / 5), rtol=1e-6)

    def test_empty_history(self):
        with pytest.raises(EmptySequenceError):
            forward_m1(model(), [0, 0, 0, 0], [False] * 4)

    def test_padding_content_is_ignored(self):
        m = model()
        a = forward_m1(m, [0, 0, 2, 3], [False, False, True, True])
        b = forward_m1(m, [4, 1, 2, 3], [False, False, True, True])
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("pooling", ["mean", "last"])
    def test_gradients(self, pooling):
        m = M1Model(3, AttentionConfig(8, 2, 1, None, 5), np.random.default_rng(0),
                    pooling=pooling).astype(np.float64)
        idx = np.array([[0, 0, 1, 2, 3], [0, 1, 1, 3, 2], [2, 3, 1, 2, 1]])
        targets = [(1,), (2, 3), (3,)]

        def loss():
            m.zero_grad()
            logp, cache = m.forward(idx, idx > 0)
            value, grad = loss_mle(logp, targets)
            m.backward(cache, grad)
            return value

        assert check_gradients(loss, m.parameters(), probe_count=128).passed

    def test_vae_input_gradients(self, rng):
        m = M1Model(3, AttentionConfig(8, 2, 1, None, 3), np.random.default_rng(0),
                    vae_dim=6).astype(np.float64)
        idx = np.array([[0, 1, 2], [3, 1, 2]])
        vae = rng.normal(size=(2, 3, 6))

        def loss():
            m.zero_grad()
            logp, cache = m.forward(idx, idx > 0, vae)
            value, grad = loss_mle(logp, [(1,), (2,)])
            m.backward(cache, grad)
            return value

        assert check_gradients(loss, m.parameters(), probe_count=64).passed


class TestLoss:
    def test_uniform_single(self):
        loss, _ = loss_mle(np.log(np.full(4, 0.25)), [2])
        assert loss == pytest.approx(np.log(4), abs=1e-4)
        assert loss == pytest.approx(1.3863, abs=1e-4)

    def test_uniform_three_targets(self):
        loss, grad = loss_mle(np.log(np.full(4, 0.25)), [1, 2, 4])
        assert loss == pytest.approx(4.1589, abs=1e-4)
        np.testing.assert_array_equal(grad, [-1, -1, 0, -1])

    def test_perfect_prediction(self):
        loss, _ = loss_mle(np.array([0.0, -np.inf, -np.inf]), [1])
        assert loss == 0.0

    def test_batch_is_summed(self):
        logp = np.log(np.array([[0.5, 0.5], [0.25, 0.75]]))
        loss, _ = loss_mle(logp, [(1,), (2,)])
        assert loss == pytest.approx(-np.log(0.5) - np.log(0.75))

    @pytest.mark.parametrize("bad", [[0], [5], []])
    def test_target_errors(self, bad):
        with pytest.raises(TargetError):
            loss_mle(np.zeros(4), bad)


class TestCandidates:
    def test_brute_force_example(self):
        c = generate_candidates(np.log([0.1, 0.5, 0.4]), 2)
        assert c.r == [2, 3]
        np.testing.assert_allclose(c.y_m1, [0.5, 0.4])

    def test_ties_by_index(self):
        assert generate_candidates(np.log(np.full(4, 0.25)), 2).r == [1, 2]

    def test_full_permutation(self, rng):
        logp = np.log(rng.dirichlet(np.ones(7)))
        assert sorted(generate_candidates(logp, 7).r) == list(range(1, 8))

    def test_clipping_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            c = generate_candidates(np.log([0.2, 0.8]), 5)
        assert c.r == [2, 1]
        assert "clipping" in caplog.text

    def test_matches_sort_oracle(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 12))
            probs = rng.choice([0.05, 0.1, 0.2, 0.3], size=n)
            probs /= probs.sum()
            r = int(rng.integers(1, n + 1))
            expected = sorted(range(1, n + 1), key=lambda c: (-probs[c - 1], c))[:r]
            got = generate_candidates(np.log(probs), r)
            assert got.r == expected
            assert 0 not in got.r and len(set(got.r)) == len(got.r)

    def test_prefix_property(self, rng):
        logp = np.log(rng.dirichlet(np.ones(9)))
        lists = [generate_candidates(logp, r).r for r in range(1, 10)]
        for short, long in zip(lists, lists[1:]):
            assert long[:len(short)] == short

    def test_positives_are_retained(self, rng):
        logp = np.log(rng.dirichlet(np.ones(6)))
        top = int(np.argmax(logp)) + 1
        assert top in generate_candidates(logp, 3).r

    def test_sampling_draws_distinct_and_ordered(self, rng):
        logp = np.log(rng.dirichlet(np.ones(10)))
        c = generate_candidates(logp, 4, sample=True, rng=np.random.default_rng(0))
        assert len(set(c.r)) == 4
        assert list(c.y_m1) == sorted(c.y_m1, reverse=True)

    def test_json_round_trip(self):
        c = CandidateList("u9", [3, 1], [0.625, 0.25])
        assert CandidateList.from_json(c.to_json()) == c


def toy_records():
    """Category 1 always follows 1 and 2 always follows 2."""
    out = []
    for u in range(20):
        c = 1 + u % 2
        out.append(make_record(f"u{u}", [c] * (1 + u % 3), [c]))
    return out


class TestTraining:
    def test_two_category_overfit(self):
        m = M1Model(2, CFG, np.random.default_rng(0))
        recs = toy_records()
        train_m1(m, recs, 4, epochs=60, lr=1e-3, batch_size=4, rng=np.random.default_rng(1))
        probs = np.exp(predict_logp(m, recs, 4))
        for r, p in zip(recs, probs):
            assert p[r.gamma[0] - 1] > 0.95

    def test_fifty_steps_halve_the_loss(self):
        m = model(num_categories=6)
        recs = [make_record(f"u{u}", [1 + u % 6, 1 + (u + 2) % 6], [1 + (u + 1) % 6])
                for u in range(12)]
        history = train_m1(m, recs, 4, epochs=50, lr=1e-2, batch_size=12,
                           rng=np.random.default_rng(0))
        assert history[-1] <= 0.5 * history[0]

    def test_deterministic(self):
        def run():
            m = model()
            recs = [make_record(f"u{u}", [1 + u % 5], [1 + (u + 1) % 5]) for u in range(10)]
            train_m1(m, recs, 4, epochs=3, lr=1e-3, batch_size=3, rng=np.random.default_rng(4))
            return m.state_dict()

        a, b = run(), run()
        for k in a:
            assert a[k].tobytes() == b[k].tobytes()

    def test_no_usable_records(self):
        with pytest.raises(EmptySequenceError):
            train_m1(model(), [make_record("u", [], [1])], 4, 1, 1e-3, 4, np.random.default_rng(0))
