"""M2: precision-centric re-ranker over M1's candidate lists."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError
from .nn import Adam, Embedding, MLP, Module
from .nn.core import DEFAULT_DTYPE, sigmoid, sigmoid_backward

log = logging.getLogger(__name__)

LOSS_MODES = ("literal", "weighted_score", "weighted_mse")


class M2Model(Module):
    """Scores each candidate from [pooled VAE context; pooled past E2; E2(candidate)]."""

    def __init__(self, num_categories, latent_dim=256, dim=64, rng=None, dtype=DEFAULT_DTYPE):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.dim = dim
        self.E2 = Embedding(num_categories + 1, dim, rng, dtype)
        self.vae_mlp = MLP(latent_dim, dim, dim, rng, dtype)
        self.scorer = MLP(3 * dim, dim, 1, rng, dtype)
        self.finalize_names()

    def forward(self, cand, past_idx, past_mask, vae):
        """cand [B,R], past_idx/past_mask [B,G], vae [B,G,L] -> scores [B,R]."""
        cand = np.asarray(cand)
        if cand.ndim != 2 or cand.shape[1] == 0:
            raise ContractError("candidate list is empty")
        past_mask = np.asarray(past_mask, dtype=bool)
        dtype = self.dtype
        w = past_mask.astype(dtype) / np.maximum(past_mask.sum(axis=1, keepdims=True), 1)
        v_all, c_v = self.vae_mlp.forward(np.asarray(vae, dtype=dtype))
        v_ctx = (v_all * w[..., None]).sum(axis=1)
        e_past, c_p = self.E2.forward(past_idx)
        p_ctx = (e_past * w[..., None]).sum(axis=1)
        e_cand, c_c = self.E2.forward(cand)
        b, r = cand.shape
        ctx = np.concatenate([
            np.broadcast_to(v_ctx[:, None, :], (b, r, self.dim)),
            np.broadcast_to(p_ctx[:, None, :], (b, r, self.dim)),
            e_cand], axis=-1)
        logit, c_s = self.scorer.forward(ctx)
        y = sigmoid(logit[..., 0])
        return y, (w, c_v, c_p, c_c, c_s, y)

    def backward(self, cache, dy):
        w, c_v, c_p, c_c, c_s, y = cache
        dlogit = sigmoid_backward(y, dy)[..., None]
        dctx = self.scorer.backward(c_s, dlogit)
        d = self.dim
        dv_ctx = dctx[..., :d].sum(axis=1)
        dp_ctx = dctx[..., d:2 * d].sum(axis=1)
        self.E2.backward(c_c, dctx[..., 2 * d:])
        self.E2.backward(c_p, dp_ctx[:, None, :] * w[..., None])
        self.vae_mlp.backward(c_v, dv_ctx[:, None, :] * w[..., None])

    def predict(self, cand, past_idx, past_mask, vae):
        return self.forward(cand, past_idx, past_mask, vae)[0]


def _precision_gap(y_m1, y_true):
    return np.maximum(np.asarray(y_m1) - np.asarray(y_true), 0.0)


def loss_precision(y_m1, y_true, y_m2, mode="weighted_score"):
    """False-positive penalty driven by M1 confidence; returns (loss, dloss/dy_m2)."""
    y_m1 = np.asarray(y_m1, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.float64)
    y_m2 = np.asarray(y_m2)
    gap = _precision_gap(y_m1, y_true)
    if mode == "literal":
        return float(np.sum(gap ** 2)), np.zeros_like(y_m2)
    if mode == "weighted_score":
        term = gap * y_m2
        return float(np.sum(term ** 2)), (2.0 * gap ** 2 * y_m2).astype(y_m2.dtype)
    if mode == "weighted_mse":
        weight = 1.0 + gap ** 2
        diff = y_true - y_m2
        return float(np.sum(weight * diff ** 2)), (-2.0 * weight * diff).astype(y_m2.dtype)
    raise ConfigError(f"unknown loss mode {mode!r}; expected one of {LOSS_MODES}")


def loss_mse(y_true, y_m2):
    y_m2 = np.asarray(y_m2)
    diff = y_m2 - np.asarray(y_true, dtype=y_m2.dtype)
    return float(np.sum(diff.astype(np.float64) ** 2)), 2.0 * diff


def loss_total(y_m1, y_true, y_m2, mode="weighted_score"):
    lp, gp = loss_precision(y_m1, y_true, y_m2, mode)
    lm, gm = loss_mse(y_true, y_m2)
    return lp + lm, gp + gm


@dataclass
class RankedOutput:
    user_id: str
    candidates: list
    y_m2: list
    y_m1: list
    topN: list


def rank_candidates(candidates, y_m2, n, user_id=None):
    """Order by score, then M1 probability (both descending), then index."""
    r = np.asarray(candidates.r)
    y2 = np.asarray(y_m2, dtype=np.float64)
    y1 = np.asarray(candidates.y_m1, dtype=np.float64)
    if len(r) == 0:
        raise ContractError("empty candidate list")
    if n > len(r):
        log.warning("N=%d exceeds %d candidates; clipping", n, len(r))
        n = len(r)
    order = np.lexsort((r, -y1, -y2))[:n]
    return RankedOutput(user_id if user_id is not None else candidates.user_id,
                        list(candidates.r), [float(v) for v in y2], list(candidates.y_m1),
                        [int(c) for c in r[order]])


# --- batching and training -------------------------------------------------

def context_arrays(records, max_groups, embeddings, latent_dim):
    """Most recent ``max_groups`` past groups per record: (idx, mask, vae)."""
    b = len(records)
    idx = np.zeros((b, max_groups), dtype=np.int64)
    mask = np.zeros((b, max_groups), dtype=bool)
    vae = np.zeros((b, max_groups, latent_dim), dtype=np.float32)
    for i, r in enumerate(records):
        groups = list(range(len(r.groups)))[-max_groups:]
        off = max_groups - len(groups)
        for j, gi in enumerate(groups):
            idx[i, off + j] = r.groups[gi]["category"]
            mask[i, off + j] = True
            if embeddings is not None:
                vae[i, off + j] = embeddings.get(r.group_key(gi))
    return idx, mask, vae


def candidate_arrays(cands, records=None):
    """Stack equal-length candidate lists; labels from record targets if given."""
    r = np.array([c.r for c in cands], dtype=np.int64)
    p = np.array([c.y_m1 for c in cands], dtype=np.float64)
    if records is None:
        return r, p, None
    y = np.zeros(r.shape, dtype=np.float64)
    for i, rec in enumerate(records):
        truth = set(rec.gamma)
        y[i] = [1.0 if c in truth else 0.0 for c in r[i]]
    return r, p, y


def train_m2(model, records, cands, max_groups, embeddings, latent_dim, epochs, lr,
             batch_size, rng, mode="weighted_score", on_epoch=None):
    if mode not in LOSS_MODES:
        raise ConfigError(f"unknown loss mode {mode!r}")
    r, p, y = candidate_arrays(cands, records)
    idx, mask, vae = context_arrays(records, max_groups, embeddings, latent_dim)
    vae = vae.astype(model.dtype)
    opt = Adam(model.parameters(), lr=lr)
    n = len(records)
    history = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            sel = order[start:start + batch_size]
            opt.zero_grad()
            y2, cache = model.forward(r[sel], idx[sel], mask[sel], vae[sel])
            loss, dy = loss_total(p[sel], y[sel], y2, mode)
            model.backward(cache, dy.astype(y2.dtype))
            opt.step()
            total += loss
        history.append(total)
        if on_epoch:
            on_epoch(epoch, total)
    return history


def score_records(model, records, cands, max_groups, embeddings, latent_dim, batch_size=2048):
    out = []
    for s in range(0, len(records), batch_size):
        recs = records[s:s + batch_size]
        r, _, _ = candidate_arrays(cands[s:s + batch_size])
        idx, mask, vae = context_arrays(recs, max_groups, embeddings, latent_dim)
        out.append(model.predict(r, idx, mask, vae.astype(model.dtype)))
    return np.concatenate(out) if out else np.zeros((0, 0))
