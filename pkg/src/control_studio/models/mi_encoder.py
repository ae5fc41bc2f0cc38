"""Multiple-instance encoder: a bag of pinned values to a latent Gaussian.

Each driving value is embedded independently (value, sinusoidal position
encoding, learned stream encoding), scored by a gated tanh/sigmoid
attention, and the attention-weighted value vectors are pooled into one
sentence embedding which two linear heads turn into the posterior mean and
log-variance. Pooling over a softmax makes the encoder invariant both to
bag order and to bag size; an empty bag falls back to a learned vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import (
    Value, Linear, Param, concat, matmul, mul, relu, sigmoid, softmax,
    sum_axis, tanh,
)
from ..autodiff.layers import _Module
from ..paf import DrivingSet, DrivingSetError
from .config import ModelConfig


@dataclass(frozen=True)
class LatentGaussian:
    """Sentence-level approximate posterior, diagonal covariance."""
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.mu).all() and np.isfinite(self.sigma).all()):
            raise ValueError("non-finite latent Gaussian")
        if (self.sigma <= 0).any():
            raise ValueError("latent sigma must be strictly positive")


_PE_CACHE: dict[tuple[int, int], np.ndarray] = {}


def positional_encoding(t: int, width: int) -> np.ndarray:
    """Sinusoidal position code: pairs (sin, cos) of t / 10000^(2i/width)."""
    if width % 2 != 0:
        raise ValueError(f"positional encoding width must be even, got {width}")
    if t < 0:
        raise ValueError(f"position must be non-negative, got {t}")
    cached = _PE_CACHE.get((t, width))
    if cached is not None:
        return cached
    i = np.arange(width // 2)
    angle = t / np.power(10000.0, 2.0 * i / width)
    enc = np.zeros(width)
    enc[0::2] = np.sin(angle)
    enc[1::2] = np.cos(angle)
    enc.setflags(write=False)
    _PE_CACHE[(t, width)] = enc
    return enc


class MiEncoder(_Module):
    def __init__(self, rng: np.random.Generator, cfg: ModelConfig, name: str = "mi"):
        super().__init__()
        self.cfg = cfg
        h, d, l = cfg.instance_dim, cfg.value_dim, cfg.gate_dim
        f, p = cfg.stream_dim, cfg.pos_dim
        in_dim = 1 + p + f
        # All maps here are bias-free linear projections.
        self.instance_proj = Linear(rng, in_dim, h, bias=False, name=f"{name}/instance_proj")
        self.query_proj = Linear(rng, h, l, bias=False, name=f"{name}/query_proj")
        self.key_proj = Linear(rng, h, l, bias=False, name=f"{name}/key_proj")
        self.value_proj = Linear(rng, h, d, bias=False, name=f"{name}/value_proj")
        if cfg.per_dim_scores:
            self.score_head = Linear(rng, l, d, bias=False, name=f"{name}/score_head")
        else:
            self.score_head = Linear(rng, l, 1, bias=False, name=f"{name}/score_head")
        self.mu_proj = Linear(rng, d, cfg.latent_dim, bias=False, name=f"{name}/mu_proj")
        self.logvar_proj = Linear(rng, d, cfg.latent_dim, bias=False, name=f"{name}/logvar_proj")
        bound = 1.0 / np.sqrt(3)
        self._register(f"{name}/stream_enc", rng.uniform(-bound, bound, (3, f)))
        self._register(f"{name}/empty_bag", np.zeros(d))
        for sub in (self.instance_proj, self.query_proj, self.key_proj, self.value_proj,
                    self.score_head, self.mu_proj, self.logvar_proj):
            for pname, param in sub.named_params().items():
                self._params[pname] = param
        self.stream_enc = self._params[f"{name}/stream_enc"]
        self.empty_bag = self._params[f"{name}/empty_bag"]

    def embed_instances(self, ds: DrivingSet, t: int) -> tuple[Value, list[int]]:
        """Instance representations (K, H) in canonical order, plus the map
        from canonical row back to the caller's bag order."""
        ds.validate_for_length(t)
        order = sorted(range(len(ds.values)), key=lambda i: ds.values[i].slot())
        items = [ds.values[i] for i in order]
        base = np.zeros((len(items), 1 + self.cfg.pos_dim))
        stream_ids = np.zeros(len(items), dtype=np.int64)
        for row, dv in enumerate(items):
            base[row, 0] = dv.value
            base[row, 1:] = positional_encoding(dv.position, self.cfg.pos_dim)
            stream_ids[row] = dv.stream_index
        table = self.stream_enc.value
        f_rows_data = table.data[stream_ids]

        def backprop(out):
            np.add.at(table.grad, stream_ids, out.grad)

        f_rows = Value(f_rows_data, (table,), backprop)
        inp = concat([Value(base), f_rows], axis=1)
        return relu(self.instance_proj(inp)), order

    def attend(self, h: Value) -> tuple[Value, Value]:
        """Attention weights and pooled sentence embedding for instances h."""
        gate = mul(tanh(self.query_proj(h)), sigmoid(self.key_proj(h)))
        scores = self.score_head(gate)  # (K, 1) or (K, D)
        values = tanh(self.value_proj(h))
        if self.cfg.per_dim_scores:
            weights = softmax(scores, axis=0)  # one distribution per latent dim
            pooled = sum_axis(mul(weights, values), axis=0)
        else:
            weights = softmax(scores[:, 0], axis=0)
            pooled = matmul(weights, values)
        return weights, pooled

    def encode_values(self, ds: DrivingSet, t: int) -> tuple[Value, Value, np.ndarray]:
        """(mu, logvar) graph nodes plus attention weights in bag order."""
        if len(ds) == 0:
            pooled = self.empty_bag.value
            weights = np.zeros(0)
        else:
            h, order = self.embed_instances(ds, t)
            w, pooled = self.attend(h)
            canonical = w.data
            weights = np.zeros_like(canonical)
            for row, original_index in enumerate(order):
                weights[original_index] = canonical[row]
        return self.mu_proj(pooled), self.logvar_proj(pooled), weights

    def encode(self, ds: DrivingSet, t: int) -> tuple[LatentGaussian, np.ndarray]:
        """Inference-mode encoding; sigma = exp(logvar / 2) keeps it positive."""
        mu, logvar, weights = self.encode_values(ds, t)
        return LatentGaussian(mu.data.copy(), np.exp(0.5 * logvar.data)), weights


def validate_driving_set(ds: DrivingSet, t: int) -> None:
    if not isinstance(ds, DrivingSet):
        raise DrivingSetError("expected a DrivingSet")
    ds.validate_for_length(t)
