"""Parameters, the module base class, and stateless differentiable ops.

Every layer follows the same protocol: ``forward(...)`` returns
``(output, cache)`` and ``backward(cache, grad_output)`` accumulates
parameter gradients and returns the gradient w.r.t. the input.  Caches are
returned rather than stored, so a layer can be applied several times in one
pass and inference never mutates the model.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DimensionError, NumericError

DEFAULT_DTYPE = np.float32


class Parameter:
    """A named trainable array with its gradient and Adam moments."""

    __slots__ = ("name", "value", "grad", "m", "v")

    def __init__(self, value, name=""):
        self.name = name
        self.value = np.asarray(value)
        self.grad = np.zeros_like(self.value)
        self.m = None
        self.v = None

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad = np.zeros_like(self.value)

    def astype(self, dtype):
        self.value = self.value.astype(dtype)
        self.grad = np.zeros_like(self.value)
        self.m = None
        self.v = None

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape}, dtype={self.value.dtype})"


class Module:
    """Container that discovers parameters and submodules by attribute."""

    def named_parameters(self, prefix=""):
        for attr, obj in vars(self).items():
            full = f"{prefix}{attr}"
            if isinstance(obj, Parameter):
                yield full, obj
            elif isinstance(obj, Module):
                yield from obj.named_parameters(full + ".")
            elif isinstance(obj, (list, tuple)):
                for i, item in enumerate(obj):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def finalize_names(self):
        seen = set()
        for name, p in self.named_parameters():
            if name in seen:
                raise ValueError(f"duplicate parameter name {name}")
            seen.add(name)
            p.name = name
        return self

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def astype(self, dtype):
        for p in self.parameters():
            p.astype(dtype)
        return self

    @property
    def dtype(self):
        params = self.parameters()
        return params[0].value.dtype if params else DEFAULT_DTYPE

    def state_dict(self):
        return {name: p.value for name, p in self.named_parameters()}

    def load_state_dict(self, state):
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        if missing:
            raise KeyError(f"missing tensors in state: {sorted(missing)}")
        for name, p in params.items():
            value = np.asarray(state[name])
            if value.shape != p.value.shape:
                raise DimensionError(
                    f"{name}: expected shape {p.value.shape}, got {value.shape}")
            p.value = value.astype(p.value.dtype, copy=True)
            p.zero_grad()


def check_finite(x, what="tensor"):
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite values in {what}")
    return x


# --- stateless ops ---------------------------------------------------------

def affine_forward(x, weight, bias):
    """``x @ weight + bias`` over the trailing dimension."""
    x = np.asarray(x)
    weight = np.asarray(weight)
    bias = np.asarray(bias)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0] or bias.shape != (weight.shape[1],):
        raise DimensionError(
            f"affine shapes do not conform: input {x.shape}, weight {weight.shape}, bias {bias.shape}")
    return x @ weight + bias


def affine_backward(x, weight, grad_out):
    """Returns (dx, dweight, dbias) for ``affine_forward``."""
    x2 = x.reshape(-1, x.shape[-1])
    g2 = grad_out.reshape(-1, grad_out.shape[-1])
    return grad_out @ weight.T, x2.T @ g2, g2.sum(axis=0)


def relu(x):
    return np.maximum(x, 0)


def relu_backward(x, grad_out):
    return grad_out * (x > 0)


def sigmoid(x):
    # split by sign so neither branch overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(y, grad_out):
    return grad_out * y * (1 - y)


def log_softmax(logits, axis=-1):
    """Numerically stable log-softmax."""
    logits = np.asarray(logits)
    if logits.shape[axis] < 1:
        raise DimensionError("log_softmax needs at least one class")
    check_finite(logits, "log_softmax input")
    shifted = logits - logits.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def log_softmax_backward(out, grad_out, axis=-1):
    return grad_out - np.exp(out) * grad_out.sum(axis=axis, keepdims=True)


def softmax(scores, axis=-1):
    shifted = scores - scores.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def positional_encoding(k, d1, dtype=DEFAULT_DTYPE):
    """Sinusoidal position table of shape [k, d1]."""
    if d1 % 2:
        raise ConfigError(f"positional encoding needs an even width, got {d1}")
    pos = np.arange(k, dtype=np.float64)[:, None]
    i = np.arange(0, d1, 2, dtype=np.float64)
    angle = pos / np.power(10000.0, i / d1)
    pe = np.empty((k, d1), dtype=np.float64)
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe.astype(dtype)
