"""VAE over [user features; item profile; category one-hot] per past group.

The posterior mean of each group is exported as that group's
user-distinctive category embedding.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nn import Adam, Linear, MLP, Module
from .nn.checkpoint import load_tensors, save_tensors
from .nn.core import DEFAULT_DTYPE, check_finite

LOGVAR_CLAMP = 10.0


def build_vae_input(f, profile_nonzeros, category, hash_dim, num_categories, dtype=np.float32):
    """Concatenate features, the L1-normalized item profile and a category one-hot.

    ``category`` is a 1-based index; PAD (0) yields an all-zero one-hot.
    """
    f = np.asarray(f, dtype=np.float64).reshape(-1)
    profile = np.zeros(hash_dim, dtype=np.float64)
    for bucket, count in profile_nonzeros:
        profile[bucket] += count
    total = profile.sum()
    if total > 0:
        profile /= total
    onehot = np.zeros(num_categories, dtype=np.float64)
    if category >= 1:
        onehot[category - 1] = 1.0
    return np.concatenate([f, profile, onehot]).astype(dtype)


def record_inputs(records, hash_dim, num_categories, dtype=np.float32):
    """One input row per past group across ``records``, with their keys."""
    rows, keys = [], []
    for r in records:
        for i, g in enumerate(r.groups):
            rows.append(build_vae_input(r.f, g["profile_nonzeros"], g["category"],
                                        hash_dim, num_categories, dtype))
            keys.append(r.group_key(i))
    width = len(records[0].f) + hash_dim + num_categories if records else hash_dim + num_categories
    X = np.stack(rows) if rows else np.zeros((0, width), dtype=dtype)
    return X, keys


class VAEModel(Module):
    """Shared 2-layer trunk, linear mean / log-variance heads, 2-layer decoder."""

    def __init__(self, input_dim, latent_dim=256, hidden_dim=256, rng=None, dtype=DEFAULT_DTYPE):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.input_dim = input_dim
        self.latent_dim = latent_dim
        self.trunk = MLP(input_dim, hidden_dim, hidden_dim, rng, dtype, out_relu=True)
        self.mu_head = Linear(hidden_dim, latent_dim, rng, dtype)
        self.logvar_head = Linear(hidden_dim, latent_dim, rng, dtype)
        self.decoder = MLP(latent_dim, hidden_dim, input_dim, rng, dtype)
        self.finalize_names()

    def encode(self, X):
        h, ct = self.trunk.forward(X)
        mu, cm = self.mu_head.forward(h)
        raw, cl = self.logvar_head.forward(h)
        logvar = np.clip(raw, -LOGVAR_CLAMP, LOGVAR_CLAMP)
        check_finite(mu, "VAE mean")
        check_finite(logvar, "VAE log-variance")
        return mu, logvar, (ct, cm, cl, raw)

    def encode_backward(self, cache, dmu, dlogvar):
        ct, cm, cl, raw = cache
        dlogvar = dlogvar * (np.abs(raw) < LOGVAR_CLAMP)
        dh = self.mu_head.backward(cm, dmu) + self.logvar_head.backward(cl, dlogvar)
        return self.trunk.backward(ct, dh)

    def decode(self, z):
        return self.decoder.forward(z)

    def forward_loss(self, X, eps, beta=1.0):
        """Summed ELBO loss over the batch with noise ``eps``; fills gradients."""
        mu, logvar, ce = self.encode(X)
        z, std = reparameterize(mu, logvar, eps, return_std=True)
        X_hat, cd = self.decode(z)
        loss, dX_hat, dmu_kl, dlogvar_kl = loss_vae(X, X_hat, mu, logvar, beta, grads=True)
        dz = self.decoder.backward(cd, dX_hat)
        dmu = dz + dmu_kl
        dlogvar = dz * eps * 0.5 * std + dlogvar_kl
        self.encode_backward(ce, dmu, dlogvar)
        return loss


def reparameterize(mu, logvar, eps, return_std=False):
    std = np.exp(0.5 * np.asarray(logvar))
    z = np.asarray(mu) + std * np.asarray(eps)
    return (z, std) if return_std else z


def kl_term(mu, logvar):
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    return float(-0.5 * np.sum(1.0 + logvar - mu ** 2 - np.exp(logvar)))


def loss_vae(X, X_hat, mu, logvar, beta=1.0, grads=False):
    """Squared reconstruction error plus ``beta`` times the Gaussian KL."""
    diff = np.asarray(X_hat) - np.asarray(X)
    loss = float(np.sum(diff.astype(np.float64) ** 2)) + beta * kl_term(mu, logvar)
    if not grads:
        return loss
    return loss, 2.0 * diff, beta * np.asarray(mu), beta * 0.5 * (np.exp(logvar) - 1.0)


def train_vae(model, X, epochs, lr, batch_size, rng, beta=1.0, on_epoch=None):
    X = X.astype(model.dtype)
    opt = Adam(model.parameters(), lr=lr)
    n = X.shape[0]
    history = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            sel = order[start:start + batch_size]
            eps = rng.standard_normal((len(sel), model.latent_dim)).astype(model.dtype)
            opt.zero_grad()
            total += model.forward_loss(X[sel], eps, beta)
            opt.step()
        history.append(total)
        if on_epoch:
            on_epoch(epoch, total)
    return history


@dataclass
class EmbeddingTable:
    """Group embeddings keyed by (user, category index, window_start)."""

    keys: list
    matrix: np.ndarray

    def __post_init__(self):
        self._row = {tuple(k): i for i, k in enumerate(self.keys)}

    @property
    def dim(self):
        return self.matrix.shape[1]

    def __len__(self):
        return len(self.keys)

    def get(self, key):
        i = self._row.get(tuple(key))
        if i is None:
            return np.zeros(self.dim, dtype=self.matrix.dtype)
        return self.matrix[i]

    def __contains__(self, key):
        return tuple(key) in self._row

    def save(self, manifest_path):
        manifest_path = Path(manifest_path)
        save_tensors(manifest_path, {"embeddings": self.matrix}, meta={"rows": len(self.keys)})
        index = manifest_path.with_name(manifest_path.name.removesuffix(".json") + ".index.tsv")
        with open(index, "w", encoding="utf-8", newline="\n") as fh:
            for row, (user, cat, ws) in enumerate(self.keys):
                fh.write(f"{user}\t{cat}\t{ws}\t{row}\n")
        return manifest_path

    @classmethod
    def load(cls, manifest_path):
        manifest_path = Path(manifest_path)
        tensors, _ = load_tensors(manifest_path)
        index = manifest_path.with_name(manifest_path.name.removesuffix(".json") + ".index.tsv")
        keys = []
        with open(index, encoding="utf-8") as fh:
            for line in fh:
                user, cat, ws, _row = line.rstrip("\n").split("\t")
                keys.append((user, int(cat), int(ws)))
        return cls(keys, tensors["embeddings"])

    @classmethod
    def zeros(cls, dim):
        return cls([], np.zeros((0, dim), dtype=np.float32))


def embed_all(records, model, hash_dim, num_categories, batch_size=4096):
    """Posterior means for every past group of every record."""
    X, keys = record_inputs(records, hash_dim, num_categories, model.dtype)
    parts = [model.encode(X[s:s + batch_size])[0] for s in range(0, X.shape[0], batch_size)]
    mat = np.concatenate(parts) if parts else np.zeros((0, model.latent_dim), dtype=model.dtype)
    return EmbeddingTable(keys, mat.astype(np.float32))
