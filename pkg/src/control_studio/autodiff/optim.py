"""Adam optimiser and gradient clipping."""

from __future__ import annotations

import logging

import numpy as np

from .layers import Param

__all__ = ["Adam", "clip_grad_norm"]

log = logging.getLogger(__name__)


def clip_grad_norm(params: list[Param], max_norm: float) -> float:
    """Scale all grads so their global L2 norm is at most ``max_norm``."""
    total = 0.0
    for p in params:
        total += float((p.grad * p.grad).sum())
    norm = np.sqrt(total)
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for p in params:
            p.value.grad = p.grad * factor
    return norm


class Adam:
    """Adam with bias correction; lr 1e-3, betas (0.9, 0.999), eps 1e-8.

    A step whose gradients contain non-finite entries is skipped entirely;
    the incident count is kept on ``skipped_steps``.
    """

    def __init__(self, params: list[Param], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = [p for p in params if p.trainable]
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self.skipped_steps = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> bool:
        """Apply one update; returns False if skipped for non-finite grads.

        Grads are zeroed afterwards either way.
        """
        finite = all(np.isfinite(p.grad).all() for p in self.params)
        if not finite:
            self.skipped_steps += 1
            log.warning("adam: skipping step %d, non-finite gradient (%d skipped so far)",
                        self.step_count + 1, self.skipped_steps)
            self.zero_grad()
            return False
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.step_count
        bc2 = 1.0 - b2 ** self.step_count
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.value.data = p.data - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        self.zero_grad()
        return True

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
