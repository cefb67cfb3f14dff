import numpy as np


class Adam:
    """Adam over a dict of named numpy arrays (updated out of place)."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = {k: np.array(v, dtype=float) for k, v in params.items()}
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in self.params.items()}
        self.v = {k: np.zeros_like(v) for k, v in self.params.items()}

    def step(self, grads):
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for k in sorted(self.params):
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            self.params[k] = self.params[k] - self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
        return self.params


class Sgd:
    def __init__(self, params, lr=1e-3, **_):
        self.params = {k: np.array(v, dtype=float) for k, v in params.items()}
        self.lr = lr

    def step(self, grads):
        for k in sorted(self.params):
            self.params[k] = self.params[k] - self.lr * grads[k]
        return self.params


def make_optimizer(name, params, lr, betas=(0.9, 0.999), eps=1e-8):
    if name == "adam":
        return Adam(params, lr, betas, eps)
    if name == "sgd":
        return Sgd(params, lr)
    raise ValueError(f"unknown optimizer {name!r}")
