"""VAE inputs, ELBO pieces, gradients, training and the embedding table."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ccrec.nn import check_gradients
from ccrec.vae import (
    EmbeddingTable,
    VAEModel,
    build_vae_input,
    embed_all,
    kl_term,
    loss_vae,
    record_inputs,
    reparameterize,
    train_vae,
)

from .conftest import make_record


class TestInput:
    def test_direct_construction(self):
        np.testing.assert_array_equal(build_vae_input([], [[0, 2]], 1, 2, 2), [1, 0, 1, 0])

    def test_empty_group(self):
        x = build_vae_input([], [], 2, 4, 3)
        np.testing.assert_array_equal(x, [0, 0, 0, 0, 0, 1, 0])

    def test_features_and_normalization(self):
        x = build_vae_input([0.5, 1.0], [[1, 3], [3, 1]], 3, 4, 3)
        assert x.shape == (2 + 4 + 3,)
        np.testing.assert_allclose(x[2:6], [0, 0.75, 0, 0.25])
        assert x[2:6].sum() == pytest.approx(1.0)

    def test_record_rows(self):
        recs = [make_record("a", [1, 2], [3]), make_record("b", [3], [1])]
        X, keys = record_inputs(recs, 4, 3)
        assert X.shape == (3, 7)
        assert keys == [("a", 1, 1_000_000), ("a", 2, 1_864_000), ("b", 3, 1_000_000)]


class TestEncoderDecoder:
    def test_zero_heads_return_bias(self, rng):
        m = VAEModel(6, 3, 5, rng)
        for head in (m.mu_head, m.logvar_head):
            head.weight.value[:] = 0.0
            head.bias.value[:] = [0.1, -0.2, 0.3]
        mu, logvar, _ = m.encode(rng.normal(size=(4, 6)).astype(np.float32))
        np.testing.assert_allclose(mu, np.tile([0.1, -0.2, 0.3], (4, 1)), rtol=1e-6)
        np.testing.assert_allclose(logvar, mu, rtol=1e-6)

    def test_logvar_is_clamped(self, rng):
        m = VAEModel(4, 2, 3, rng)
        m.logvar_head.bias.value[:] = [50.0, -50.0]
        m.logvar_head.weight.value[:] = 0.0
        _, logvar, _ = m.encode(np.ones((1, 4), dtype=np.float32))
        np.testing.assert_array_equal(logvar, [[10.0, -10.0]])

    def test_identical_inputs(self, rng):
        m = VAEModel(6, 3, 5, rng)
        x = rng.normal(size=(1, 6)).astype(np.float32)
        a, b = m.encode(x), m.encode(x.copy())
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_zero_decoder_returns_bias(self, rng):
        m = VAEModel(5, 3, 4, rng)
        m.decoder.fc2.weight.value[:] = 0.0
        m.decoder.fc2.bias.value[:] = np.arange(5)
        out, _ = m.decode(rng.normal(size=(3, 3)).astype(np.float32))
        np.testing.assert_array_equal(out, np.tile(np.arange(5), (3, 1)))


class TestReparameterize:
    def test_zero_noise(self):
        np.testing.assert_array_equal(reparameterize([1.0, 2.0], [0.3, -1.0], [0.0, 0.0]), [1.0, 2.0])

    def test_unit_scale(self):
        e = np.array([0.3, -1.2])
        np.testing.assert_array_equal(reparameterize([0.0, 0.0], [0.0, 0.0], e), e)

    def test_direct_arithmetic(self):
        np.testing.assert_allclose(reparameterize([1.0], [np.log(4.0)], [0.5]), [2.0])


class TestLoss:
    def test_prior_has_zero_kl(self):
        assert kl_term(np.zeros(5), np.zeros(5)) == 0.0

    def test_unit_mean_kl(self):
        x = np.ones(3)
        assert loss_vae(x, x, [1.0], [0.0], beta=1.0) == pytest.approx(0.5)

    def test_beta_zero_is_reconstruction(self, rng):
        x, xh = rng.normal(size=(2, 4)), rng.normal(size=(2, 4))
        assert loss_vae(x, xh, rng.normal(size=3), rng.normal(size=3), beta=0.0) == \
            pytest.approx(((x - xh) ** 2).sum())

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, 6, elements=st.floats(-20, 20)),
           arrays(np.float64, 6, elements=st.floats(-10, 10)))
    def test_kl_non_negative(self, mu, logvar):
        assert kl_term(mu, logvar) >= -1e-9

    def test_gradients_with_frozen_noise(self, rng):
        m = VAEModel(10, 4, 6, rng).astype(np.float64)
        X = rng.random((5, 10))
        eps = rng.standard_normal((5, 4))

        def loss():
            m.zero_grad()
            return m.forward_loss(X, eps, beta=0.7)

        report = check_gradients(loss, m.parameters(), probe_count=128)
        assert report.passed, report.worst

    def test_reparameterization_gradient(self, rng):
        """dz/dmu is the identity and dz/dlogvar is 0.5 * std * eps."""
        mu, logvar, eps = rng.normal(size=4), rng.normal(size=4), rng.normal(size=4)
        h = 1e-6
        for j in range(4):
            d = np.zeros(4)
            d[j] = h
            dz_mu = (reparameterize(mu + d, logvar, eps) - reparameterize(mu - d, logvar, eps)) / (2 * h)
            dz_lv = (reparameterize(mu, logvar + d, eps) - reparameterize(mu, logvar - d, eps)) / (2 * h)
            np.testing.assert_allclose(dz_mu, d / h, atol=1e-8)
            np.testing.assert_allclose(dz_lv[j], 0.5 * np.exp(0.5 * logvar[j]) * eps[j], rtol=1e-6)


class TestTraining:
    def test_single_point_autoencodes(self, rng):
        m = VAEModel(6, 4, 32, rng)
        X = np.array([[0.2, 0.0, 0.5, 0.3, 1.0, 0.0]], dtype=np.float32)
        train_vae(m, X, 1500, 1e-2, 1, np.random.default_rng(0), beta=0.0)
        mu, _, _ = m.encode(X)
        X_hat, _ = m.decode(mu)
        assert float(((X_hat - X) ** 2).sum()) < 1e-3

    @staticmethod
    def prototype_data(rng):
        prototypes = (rng.random((5, 12)) < 0.5).astype(np.float64)
        return (prototypes[np.arange(50) % 5] + 0.01 * rng.normal(size=(50, 12))).astype(np.float32)

    def test_toy_loss_drops_below_a_fifth(self, rng):
        X = self.prototype_data(rng)
        m = VAEModel(12, 8, 32, np.random.default_rng(0))
        history = train_vae(m, X, 200, 1e-3, 10, np.random.default_rng(0), beta=0.1)
        assert history[-1] < 0.2 * history[0]

    def test_unit_beta_stalls_on_unit_scale_inputs(self, rng):
        """With beta=1 the KL price of a precise code outweighs its reconstruction gain.

        Most of the data variance stays in the loss, which is why small-scale
        runs lower beta.
        """
        X = self.prototype_data(rng)
        m = VAEModel(12, 8, 32, np.random.default_rng(0))
        history = train_vae(m, X, 200, 1e-3, 10, np.random.default_rng(0), beta=1.0)
        assert history[-1] > 0.25 * history[0]


class TestEmbeddingTable:
    def records(self):
        return [make_record("a", [1, 2], [3]), make_record("b", [3, 3, 1], [2])]

    def test_one_row_per_group_and_deterministic(self, rng):
        m = VAEModel(4 + 3, 5, 8, rng)
        a = embed_all(self.records(), m, 4, 3)
        b = embed_all(self.records(), m, 4, 3)
        assert len(a) == 5
        assert a.matrix.tobytes() == b.matrix.tobytes()
        X, _ = record_inputs(self.records(), 4, 3)
        np.testing.assert_array_equal(a.matrix, m.encode(X)[0])

    def test_missing_key_is_zero(self, rng):
        table = embed_all(self.records(), VAEModel(7, 5, 8, rng), 4, 3)
        np.testing.assert_array_equal(table.get(("nobody", 1, 0)), np.zeros(5))
        assert ("a", 1, 1_000_000) in table

    def test_save_load(self, tmp_path, rng):
        table = embed_all(self.records(), VAEModel(7, 5, 8, rng), 4, 3)
        table.save(tmp_path / "emb.json")
        back = EmbeddingTable.load(tmp_path / "emb.json")
        assert back.keys == table.keys
        assert back.matrix.tobytes() == table.matrix.tobytes()
        assert (tmp_path / "emb.index.tsv").read_text().splitlines()[0] == "a\t1\t1000000\t0"
