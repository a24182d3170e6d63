"""Masked multi-head self-attention and a post-norm transformer encoder."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, EmptySequenceError
from .core import DEFAULT_DTYPE, Module, relu, relu_backward, softmax
from .layers import LayerNorm, Linear


@dataclass(frozen=True)
class AttentionConfig:
    model_dim: int = 64
    num_heads: int = 2
    num_layers: int = 1
    ff_dim: int | None = None
    max_seq_len: int = 10

    def __post_init__(self):
        for field in ("model_dim", "num_heads", "num_layers", "max_seq_len"):
            if getattr(self, field) <= 0:
                raise ConfigError(f"{field} must be positive")
        if self.ff_dim is not None and self.ff_dim <= 0:
            raise ConfigError("ff_dim must be positive")
        if self.model_dim % self.num_heads:
            raise ConfigError(
                f"model_dim {self.model_dim} not divisible by num_heads {self.num_heads}")

    @property
    def ff(self):
        return self.ff_dim if self.ff_dim is not None else 4 * self.model_dim

    @property
    def head_dim(self):
        return self.model_dim // self.num_heads


def _check_mask(mask):
    mask = np.asarray(mask, dtype=bool)
    if not mask.any(axis=-1).all():
        raise EmptySequenceError("sequence has no unmasked positions")
    return mask


class MultiHeadAttention(Module):
    """Scaled dot-product self-attention; ``mask`` is True at real positions."""

    def __init__(self, cfg: AttentionConfig, rng, dtype=DEFAULT_DTYPE):
        d = cfg.model_dim
        self.num_heads = cfg.num_heads
        self.q = Linear(d, d, rng, dtype)
        self.k = Linear(d, d, rng, dtype)
        self.v = Linear(d, d, rng, dtype)
        self.o = Linear(d, d, rng, dtype)

    def _split(self, x):
        b, n, d = x.shape
        return x.reshape(b, n, self.num_heads, d // self.num_heads).transpose(0, 2, 1, 3)

    @staticmethod
    def _merge(x):
        b, h, n, dh = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, n, h * dh)

    def forward(self, x, mask):
        mask = _check_mask(mask)
        q_lin, cq = self.q.forward(x)
        k_lin, ck = self.k.forward(x)
        v_lin, cv = self.v.forward(x)
        q, k, v = self._split(q_lin), self._split(k_lin), self._split(v_lin)
        scale = 1.0 / np.sqrt(q.shape[-1])
        scores = (q @ k.transpose(0, 1, 3, 2)) * scale
        scores = np.where(mask[:, None, None, :], scores, -np.inf)
        weights = softmax(scores).astype(x.dtype, copy=False)
        ctx = self._merge(weights @ v)
        out, co = self.o.forward(ctx)
        return out, (cq, ck, cv, co, q, k, v, weights, scale)

    def backward(self, cache, grad_out):
        cq, ck, cv, co, q, k, v, weights, scale = cache
        dctx = self._split(self.o.backward(co, grad_out))
        dweights = dctx @ v.transpose(0, 1, 3, 2)
        dv = weights.transpose(0, 1, 3, 2) @ dctx
        dscores = weights * (dweights - (dweights * weights).sum(axis=-1, keepdims=True))
        dscores *= scale
        dq = dscores @ k
        dk = dscores.transpose(0, 1, 3, 2) @ q
        dx = self.q.backward(cq, self._merge(dq))
        dx += self.k.backward(ck, self._merge(dk))
        dx += self.v.backward(cv, self._merge(dv))
        return dx


class EncoderLayer(Module):
    """attention -> add & norm -> feed-forward -> add & norm."""

    def __init__(self, cfg: AttentionConfig, rng, dtype=DEFAULT_DTYPE):
        self.attn = MultiHeadAttention(cfg, rng, dtype)
        self.norm1 = LayerNorm(cfg.model_dim, dtype)
        self.ff1 = Linear(cfg.model_dim, cfg.ff, rng, dtype)
        self.ff2 = Linear(cfg.ff, cfg.model_dim, rng, dtype)
        self.norm2 = LayerNorm(cfg.model_dim, dtype)

    def forward(self, x, mask):
        a, ca = self.attn.forward(x, mask)
        h, cn1 = self.norm1.forward(x + a)
        f_pre, cf1 = self.ff1.forward(h)
        f, cf2 = self.ff2.forward(relu(f_pre))
        out, cn2 = self.norm2.forward(h + f)
        return out, (ca, cn1, cf1, f_pre, cf2, cn2)

    def backward(self, cache, grad_out):
        ca, cn1, cf1, f_pre, cf2, cn2 = cache
        dsum2 = self.norm2.backward(cn2, grad_out)
        dh = dsum2 + self.ff1.backward(cf1, relu_backward(f_pre, self.ff2.backward(cf2, dsum2)))
        dsum1 = self.norm1.backward(cn1, dh)
        return dsum1 + self.attn.backward(ca, dsum1)


class TransformerEncoder(Module):
    def __init__(self, cfg: AttentionConfig, rng, dtype=DEFAULT_DTYPE):
        self.cfg = cfg
        self.layers = [EncoderLayer(cfg, rng, dtype) for _ in range(cfg.num_layers)]

    def forward(self, x, mask):
        caches = []
        for layer in self.layers:
            x, c = layer.forward(x, mask)
            caches.append(c)
        return x, caches

    def backward(self, caches, grad_out):
        for layer, c in zip(reversed(self.layers), reversed(caches)):
            grad_out = layer.backward(c, grad_out)
        return grad_out

    def attention_weights(self, x, mask):
        """Per-layer attention weight tensors [B, heads, k, k] for inspection."""
        out = []
        for layer in self.layers:
            _, ca = layer.attn.forward(x, mask)
            out.append(ca[7])
            x, _ = layer.forward(x, mask)
        return out


def multi_head_attention(seq, mask, encoder: TransformerEncoder):
    """Encode one [k, d1] sequence; convenience wrapper over the batch path."""
    out, _ = encoder.forward(np.asarray(seq)[None], np.asarray(mask, dtype=bool)[None])
    return out[0]
