"""M1: transformer category predictor that doubles as the negative sampler.

The model reads a user's left-padded past-category sequence and returns
log-probabilities over all categories.  Its top-ranked categories form the
candidate list handed to the re-ranker, together with their probabilities.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .data.vocab import encode_record
from .errors import ConfigError, EmptySequenceError, TargetError
from .nn import Adam, AttentionConfig, Embedding, Linear, Module, TransformerEncoder, positional_encoding
from .nn.core import DEFAULT_DTYPE, log_softmax, log_softmax_backward, relu, relu_backward

log = logging.getLogger(__name__)


class M1Model(Module):
    """E1 -> +PE -> encoder -> pool -> FC1+ReLU -> FC2 -> log-softmax.

    Output column ``j`` is category index ``j + 1`` (index 0 is PAD).  With
    ``vae_dim`` set, token embeddings come from a projection of per-group VAE
    embeddings instead of the E1 table (the ``mle_vae`` ablation).
    """

    def __init__(self, num_categories, cfg: AttentionConfig, rng, dtype=DEFAULT_DTYPE,
                 pooling="mean", vae_dim=None):
        if pooling not in ("mean", "last"):
            raise ConfigError(f"unknown pooling {pooling!r}")
        d1 = cfg.model_dim
        self.cfg = cfg
        self.num_categories = num_categories
        self.pooling = pooling
        if vae_dim:
            self.vae_proj = Linear(vae_dim, d1, rng, dtype)
        else:
            self.E1 = Embedding(num_categories + 1, d1, rng, dtype)
        self.encoder = TransformerEncoder(cfg, rng, dtype)
        self.fc1 = Linear(d1, d1, rng, dtype)
        self.fc2 = Linear(d1, num_categories, rng, dtype)
        self.finalize_names()

    @property
    def uses_vae(self):
        return hasattr(self, "vae_proj")

    def forward(self, idx, mask, vae=None):
        idx = np.asarray(idx)
        mask = np.asarray(mask, dtype=bool)
        if not mask.any(axis=-1).all():
            raise EmptySequenceError("history has no real categories")
        k = idx.shape[-1]
        if self.uses_vae:
            if vae is None:
                raise ConfigError("this model needs per-position VAE embeddings")
            tok, c_tok = self.vae_proj.forward(vae)
        else:
            tok, c_tok = self.E1.forward(idx)
        x = tok + positional_encoding(k, self.cfg.model_dim, tok.dtype)
        h, c_enc = self.encoder.forward(x, mask)
        if self.pooling == "mean":
            w = mask.astype(h.dtype) / mask.sum(axis=-1, keepdims=True)
        else:
            w = np.zeros(mask.shape, dtype=h.dtype)
            w[:, -1] = 1.0
        pooled = (h * w[..., None]).sum(axis=1)
        a_pre, c1 = self.fc1.forward(pooled)
        logits, c2 = self.fc2.forward(relu(a_pre))
        logp = log_softmax(logits)
        return logp, (c_tok, c_enc, w, a_pre, c1, c2, logp)

    def backward(self, cache, dlogp):
        c_tok, c_enc, w, a_pre, c1, c2, logp = cache
        dlogits = log_softmax_backward(logp, dlogp)
        da = relu_backward(a_pre, self.fc2.backward(c2, dlogits))
        dpooled = self.fc1.backward(c1, da)
        dh = dpooled[:, None, :] * w[..., None]
        dx = self.encoder.backward(c_enc, dh)
        if self.uses_vae:
            self.vae_proj.backward(c_tok, dx)
        else:
            self.E1.backward(c_tok, dx)

    def predict(self, idx, mask, vae=None):
        return self.forward(idx, mask, vae)[0]


def forward_m1(model, delta_indices, mask, vae=None):
    """Log-probabilities for a single padded sequence."""
    v = None if vae is None else np.asarray(vae)[None]
    return model.predict(np.asarray(delta_indices)[None], np.asarray(mask)[None], v)[0]


def loss_mle(logp, targets):
    """Summed negative log-likelihood over each row's target set.

    ``logp`` is [B, C] (or a single [C] row with one target set); targets are
    category indices in [1, C].  Returns (loss, dloss/dlogp).
    """
    single = np.ndim(logp) == 1
    logp = np.atleast_2d(logp)
    if single:
        targets = [targets]
    n_cls = logp.shape[1]
    grad = np.zeros_like(logp)
    loss = 0.0
    for b, gamma in enumerate(targets):
        if len(gamma) == 0:
            raise TargetError("empty target set")
        for c in gamma:
            if not 1 <= c <= n_cls:
                raise TargetError(f"target {c} outside [1, {n_cls}]")
            loss -= float(logp[b, c - 1])
            grad[b, c - 1] -= 1.0
    return loss, (grad[0] if single else grad)


@dataclass
class CandidateList:
    user_id: str
    r: list
    y_m1: list

    def to_json(self):
        return json.dumps({"user": self.user_id, "r": [int(c) for c in self.r],
                           "p": [float(p) for p in self.y_m1]}, separators=(",", ":"))

    @classmethod
    def from_json(cls, line):
        d = json.loads(line)
        return cls(d["user"], d["r"], d["p"])


def generate_candidates(logp, r_size, user_id="", sample=False, rng=None):
    """Top-``r_size`` categories by probability (ties: lower index first).

    With ``sample=True`` the set is drawn without replacement in proportion
    to probability (Gumbel top-k) and then ordered the same way.
    """
    probs = np.exp(np.asarray(logp, dtype=np.float64))
    n = probs.shape[0]
    if r_size < 1:
        raise ConfigError("r_size must be >= 1")
    if r_size > n:
        log.warning("r_size %d exceeds %d categories; clipping", r_size, n)
        r_size = n
    idx = np.arange(1, n + 1)
    if sample:
        rng = rng if rng is not None else np.random.default_rng(0)
        with np.errstate(divide="ignore"):
            keys = np.log(probs) + rng.gumbel(size=n)
        chosen = np.argsort(-keys, kind="stable")[:r_size]
        order = chosen[np.lexsort((idx[chosen], -probs[chosen]))]
    else:
        order = np.lexsort((idx, -probs))[:r_size]
    return CandidateList(user_id, [int(i) for i in idx[order]], [float(p) for p in probs[order]])


# --- batching and training -------------------------------------------------

def batch_arrays(records, k, embeddings=None, latent_dim=None):
    """Stack encoded histories; returns (idx, mask, targets, vae or None)."""
    enc = [encode_record(r, k) for r in records]
    idx = np.stack([e.indices for e in enc])
    mask = np.stack([e.mask for e in enc])
    targets = [e.targets for e in enc]
    vae = None
    if embeddings is not None:
        vae = np.zeros(idx.shape + (latent_dim,), dtype=np.float32)
        for b, (r, e) in enumerate(zip(records, enc)):
            for slot in np.flatnonzero(e.positions >= 0):
                vae[b, slot] = embeddings.get(r.group_key(int(e.positions[slot])))
    return idx, mask, targets, vae


def usable(records, k, need_targets=True):
    """Records with at least one known past category (and a target, if asked)."""
    out = []
    for r in records:
        if not encode_record(r, k).mask.any():
            continue
        if need_targets and not r.gamma:
            continue
        out.append(r)
    return out


def train_m1(model, records, k, epochs, lr, batch_size, rng, embeddings=None,
             on_epoch=None):
    records = usable(records, k)
    if not records:
        raise EmptySequenceError("no usable training records for M1")
    idx, mask, targets, vae = batch_arrays(
        records, k, embeddings, getattr(embeddings, "dim", None))
    vae = None if vae is None else vae.astype(model.dtype)
    opt = Adam(model.parameters(), lr=lr)
    history = []
    n = len(records)
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            sel = order[start:start + batch_size]
            opt.zero_grad()
            logp, cache = model.forward(idx[sel], mask[sel], None if vae is None else vae[sel])
            loss, dlogp = loss_mle(logp, [targets[i] for i in sel])
            model.backward(cache, dlogp.astype(logp.dtype))
            opt.step()
            total += loss
        history.append(total)
        if on_epoch:
            on_epoch(epoch, total)
    return history


def predict_logp(model, records, k, embeddings=None, batch_size=1024):
    rows = []
    for start in range(0, len(records), batch_size):
        chunk = records[start:start + batch_size]
        idx, mask, _, vae = batch_arrays(chunk, k, embeddings, getattr(embeddings, "dim", None))
        rows.append(model.predict(idx, mask, None if vae is None else vae.astype(model.dtype)))
    return np.concatenate(rows) if rows else np.zeros((0, model.num_categories))
