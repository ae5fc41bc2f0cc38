"""Masked-input baseline encoder.

Sparsity is encoded densely: a (T, 6) matrix whose first three columns hold
the driven PAF values (zero where missing) and whose last three columns are
per-stream mask bits, 1 = driven. A stack of bidirectional GRUs summarises
the sequence; the concatenated final states of both directions feed a linear
projection to (mu, log-variance). Unlike the bag encoder this path is not
permutation invariant, which is the point of the comparison.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Value, Linear, RecurrentLayer, concat
from ..autodiff.layers import _Module
from ..paf import STREAMS, DrivingSet
from .config import (
    ModelConfig, masked_encoder_param_count, mi_encoder_param_count, parity_rnn_width,
)


class ParityError(RuntimeError):
    """Encoder parameter counts drifted outside the +-10% parity band."""


def build_masked_input(ds: DrivingSet, t: int) -> np.ndarray:
    """Dense (T, 6) encoding of a driving set; columns 0-2 values, 3-5 mask bits."""
    ds.validate_for_length(t)
    mi = np.zeros((t, 6))
    for dv in ds:
        s = dv.stream_index
        mi[dv.position, s] = dv.value
        mi[dv.position, s + 3] = 1.0
    return mi


def sample_training_mask(paf: np.ndarray, mask_percent: float,
                         rng: np.random.Generator) -> DrivingSet:
    """Keep each of the 3T slots as driven with probability (100 - P)%.

    ``mask_percent`` is the fraction masked OUT, so P=100 drives nothing and
    P=0 drives everything.
    """
    if not (0.0 <= mask_percent <= 100.0):
        raise ValueError(f"mask percentage must lie in [0, 100], got {mask_percent}")
    t = paf.shape[0]
    keep = rng.random((t, 3)) >= (mask_percent / 100.0)
    slots = [(pos, s) for pos in range(t) for s in range(3) if keep[pos, s]]
    return DrivingSet.from_paf(paf, slots)


class MaskedEncoder(_Module):
    def __init__(self, rng: np.random.Generator, cfg: ModelConfig, name: str = "masked"):
        super().__init__()
        self.cfg = cfg
        width = cfg.masked_rnn_width or parity_rnn_width(cfg)
        self.width = width
        self.grus: list[RecurrentLayer] = []
        in_dim = 6
        for i in range(cfg.masked_rnn_layers):
            layer = RecurrentLayer(rng, in_dim, width, kind="gru", direction="bi",
                                   name=f"{name}/gru{i}")
            self.grus.append(layer)
            in_dim = layer.out_dim
        self.summary_proj = Linear(rng, in_dim, 2 * cfg.latent_dim,
                                   name=f"{name}/summary_proj")
        for sub in [*self.grus, self.summary_proj]:
            for pname, param in sub.named_params().items():
                self._params[pname] = param
        if cfg.parity_guard:
            self._check_parity()

    def _check_parity(self) -> None:
        mine = self.param_count()
        expected = masked_encoder_param_count(self.cfg, self.width)
        assert mine == expected, f"parameter bookkeeping drifted: {mine} != {expected}"
        ratio = mine / mi_encoder_param_count(self.cfg)
        if not (0.9 <= ratio <= 1.1):
            raise ParityError(
                f"masked encoder has {mine} parameters, {ratio:.3f}x the "
                f"multiple-instance encoder's; parity requires [0.9, 1.1]")

    def encode_values(self, mi: np.ndarray) -> tuple[Value, Value]:
        """(mu, logvar) graph nodes from a dense masked input."""
        if mi.ndim != 2 or mi.shape[1] != 6:
            raise ValueError(f"masked input must be (T, 6), got {mi.shape}")
        x = Value(np.asarray(mi, dtype=np.float64))
        for layer in self.grus:
            x = layer(x)
        w = self.grus[-1].width
        summary = concat([x[x.data.shape[0] - 1, :w], x[0, w:]], axis=0)
        both = self.summary_proj(summary)
        lat = self.cfg.latent_dim
        return both[:lat], both[lat:]
