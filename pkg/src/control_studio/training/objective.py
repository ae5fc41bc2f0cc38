"""CVAE objective: reparameterised sampling, KL term, ELBO assembly.

The reconstruction term is the mean squared error over the (T, 3) output in
normalised units; the KL is the closed form against a standard normal
prior. Total = reconstruction + beta * KL.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Value, add, const, exp, mse, mul, scale, sum_all
from ..models.mi_encoder import LatentGaussian

__all__ = ["ElboTerms", "reparameterize", "kl_divergence", "elbo_loss",
           "reparameterize_nodes", "kl_nodes", "elbo_nodes"]


@dataclass(frozen=True)
class ElboTerms:
    reconstruction: float
    kl: float
    beta: float

    @property
    def total(self) -> float:
        return self.reconstruction + self.beta * self.kl


def reparameterize(lg: LatentGaussian, noise_seed: int) -> np.ndarray:
    """z = mu + sigma * eps with eps drawn from the seeded generator."""
    eps = np.random.default_rng(noise_seed).standard_normal(lg.mu.shape[0])
    return lg.mu + lg.sigma * eps


def kl_divergence(lg: LatentGaussian) -> float:
    """KL(N(mu, diag sigma^2) || N(0, I)) in nats."""
    var = lg.sigma ** 2
    return float(0.5 * np.sum(var + lg.mu ** 2 - 1.0 - np.log(var)))


def elbo_loss(pred: np.ndarray, truth: np.ndarray, lg: LatentGaussian,
              beta: float) -> ElboTerms:
    if pred.shape != truth.shape:
        raise ValueError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    rec = float(np.mean((pred - truth) ** 2))
    return ElboTerms(rec, kl_divergence(lg), beta)


# --- graph-side counterparts used inside the training loop ----------------

def reparameterize_nodes(mu: Value, logvar: Value, eps: np.ndarray) -> Value:
    return add(mu, mul(exp(scale(logvar, 0.5)), const(eps)))


def kl_nodes(mu: Value, logvar: Value) -> Value:
    inner = add(add(exp(logvar), mul(mu, mu)), add(scale(logvar, -1.0), -1.0))
    return scale(sum_all(inner), 0.5)


def elbo_nodes(pred: Value, truth: np.ndarray, mu: Value, logvar: Value,
               beta: float) -> tuple[Value, ElboTerms]:
    rec = mse(pred, truth)
    kl = kl_nodes(mu, logvar)
    total = add(rec, scale(kl, beta))
    return total, ElboTerms(float(rec.data), float(kl.data), beta)
