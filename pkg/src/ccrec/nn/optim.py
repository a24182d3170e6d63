"""Adam with bias correction; moments live on each Parameter."""
import numpy as np

from ..errors import NumericError


def adam_step(params, lr, beta1=0.9, beta2=0.999, eps=1e-8, step=1):
    if step < 1:
        raise ValueError("step counts from 1")
    c1 = 1.0 - beta1 ** step
    c2 = 1.0 - beta2 ** step
    for p in params:
        g = p.grad
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {p.name or 'parameter'}")
        if p.m is None:
            p.m = np.zeros_like(p.value)
            p.v = np.zeros_like(p.value)
        p.m *= beta1
        p.m += (1.0 - beta1) * g
        p.v *= beta2
        p.v += (1.0 - beta2) * (g * g)
        m_hat = p.m / c1
        v_hat = p.v / c2
        p.value -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.value.dtype, copy=False)


class Adam:
    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.t += 1
        adam_step(self.params, self.lr, self.beta1, self.beta2, self.eps, self.t)
