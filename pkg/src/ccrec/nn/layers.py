"""Trainable layers: affine, embedding, layer norm and a 2-layer MLP."""
from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from .core import (
    DEFAULT_DTYPE,
    Module,
    Parameter,
    affine_backward,
    affine_forward,
    relu,
    relu_backward,
)


class Linear(Module):
    """Affine map ``x @ W + b`` with weight stored as [in, out]."""

    def __init__(self, n_in, n_out, rng, dtype=DEFAULT_DTYPE):
        bound = 1.0 / np.sqrt(n_in)
        self.weight = Parameter(rng.uniform(-bound, bound, size=(n_in, n_out)).astype(dtype))
        self.bias = Parameter(np.zeros(n_out, dtype=dtype))

    def forward(self, x):
        return affine_forward(x, self.weight.value, self.bias.value), x

    def backward(self, x, grad_out):
        dx, dw, db = affine_backward(x, self.weight.value, grad_out)
        self.weight.grad += dw
        self.bias.grad += db
        return dx


class Embedding(Module):
    """Lookup table initialized from a unit normal."""

    def __init__(self, num, dim, rng, dtype=DEFAULT_DTYPE, scale=1.0):
        self.weight = Parameter(rng.normal(0.0, scale, size=(num, dim)).astype(dtype))

    def forward(self, idx):
        idx = np.asarray(idx)
        if idx.size and (idx.min() < 0 or idx.max() >= self.weight.value.shape[0]):
            raise DimensionError(
                f"embedding index out of range [0, {self.weight.value.shape[0]})")
        return self.weight.value[idx], idx

    def backward(self, idx, grad_out):
        np.add.at(self.weight.grad, idx.reshape(-1), grad_out.reshape(-1, grad_out.shape[-1]))
        return None


class LayerNorm(Module):
    """Per-row normalization over the last axis with learned scale and shift."""

    def __init__(self, dim, dtype=DEFAULT_DTYPE, eps=1e-5):
        self.gamma = Parameter(np.ones(dim, dtype=dtype))
        self.beta = Parameter(np.zeros(dim, dtype=dtype))
        self.eps = eps

    def normalize(self, x):
        mu = x.mean(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(x.var(axis=-1, keepdims=True) + self.eps)
        return (x - mu) * inv, inv

    def forward(self, x):
        xhat, inv = self.normalize(x)
        return xhat * self.gamma.value + self.beta.value, (xhat, inv)

    def backward(self, cache, grad_out):
        xhat, inv = cache
        n = xhat.shape[-1]
        self.gamma.grad += (grad_out * xhat).reshape(-1, n).sum(axis=0)
        self.beta.grad += grad_out.reshape(-1, n).sum(axis=0)
        dxhat = grad_out * self.gamma.value
        return (inv / n) * (
            n * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
        )


class MLP(Module):
    """Two affine layers with a ReLU between them (and optionally after)."""

    def __init__(self, n_in, n_hidden, n_out, rng, dtype=DEFAULT_DTYPE, out_relu=False):
        self.fc1 = Linear(n_in, n_hidden, rng, dtype)
        self.fc2 = Linear(n_hidden, n_out, rng, dtype)
        self.out_relu = out_relu

    def forward(self, x):
        h_pre, c1 = self.fc1.forward(x)
        h = relu(h_pre)
        out, c2 = self.fc2.forward(h)
        if self.out_relu:
            return relu(out), (c1, h_pre, c2, out)
        return out, (c1, h_pre, c2, None)

    def backward(self, cache, grad_out):
        c1, h_pre, c2, out = cache
        if out is not None:
            grad_out = relu_backward(out, grad_out)
        dh = self.fc2.backward(c2, grad_out)
        return self.fc1.backward(c1, relu_backward(h_pre, dh))
