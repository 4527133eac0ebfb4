"""Adam optimizer over named numpy parameter arrays."""

from __future__ import annotations

import numpy as np


class Adam:
    """Standard Adam update rule with bias correction.

    Parameters are a name -> float64 array dict and are updated in place;
    gradients are passed to :meth:`step` under the same names.  Missing
    names in a step simply keep their moment state (zero gradient).
    """

    def __init__(self, params: dict[str, np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for name, param in self.params.items():
            g = grads.get(name)
            if g is None:
                g = np.zeros_like(param)
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * np.square(g)
            param -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
