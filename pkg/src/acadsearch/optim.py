"""Decoupled-weight-decay adaptive gradient updates (AdamW), numpy only."""
from __future__ import annotations

import numpy as np


class AdamW:
    """Standard AdamW over a single dense parameter array.

    The parameter may be a view (e.g. the trainable slice of a larger
    matrix); updates are applied in place.
    """

    def __init__(self, shape, lr: float = 1e-3, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.01,
                 dtype=np.float64):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = np.zeros(shape, dtype=dtype)
        self.v = np.zeros(shape, dtype=dtype)
        self.t = 0
        self._scratch = np.empty(shape, dtype=dtype)

    def step(self, param: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        np.multiply(grad, grad, out=self._scratch)
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * self._scratch
        # scratch = sqrt(v_hat) + eps, then the full update in place
        np.divide(self.v, 1.0 - self.beta2 ** self.t, out=self._scratch)
        np.sqrt(self._scratch, out=self._scratch)
        self._scratch += self.eps
        np.divide(self.m, (1.0 - self.beta1 ** self.t) * self._scratch,
                  out=self._scratch)
        if self.weight_decay:
            self._scratch += self.weight_decay * param
        self._scratch *= self.lr
        param -= self._scratch
