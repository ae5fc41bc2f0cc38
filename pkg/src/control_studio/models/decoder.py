"""PAF decoder: latent sample plus content embeddings to a (T, 3) sequence.

The latent is repeated to phone level, concatenated with the content rows,
run through four bidirectional GRU layers, a tanh perceptron, and a linear
3-wide head. The NoControl family feeds the latent slot a zero vector, so
the decoder parameters are identical across families.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Value, Linear, RecurrentLayer, concat, const, repeat_rows, tanh
from ..autodiff.layers import _Module
from .config import ModelConfig


class PafDecoder(_Module):
    def __init__(self, rng: np.random.Generator, cfg: ModelConfig, name: str = "decoder"):
        super().__init__()
        self.cfg = cfg
        in_dim = cfg.latent_dim + cfg.phone_dim
        self.grus: list[RecurrentLayer] = []
        for i, width in enumerate(cfg.gru_widths):
            layer = RecurrentLayer(rng, in_dim, width, kind="gru", direction="bi",
                                   name=f"{name}/gru{i}")
            self.grus.append(layer)
            in_dim = layer.out_dim
        self.perceptron = Linear(rng, in_dim, cfg.perceptron_dim, name=f"{name}/perceptron")
        self.head = Linear(rng, cfg.perceptron_dim, cfg.out_dim, name=f"{name}/head")
        for sub in [*self.grus, self.perceptron, self.head]:
            for pname, param in sub.named_params().items():
                self._params[pname] = param

    def __call__(self, z: Value | None, content: Value) -> Value:
        t = content.data.shape[0]
        if z is None:
            z = const(np.zeros(self.cfg.latent_dim))
        x = concat([repeat_rows(z, t), content], axis=1)
        for layer in self.grus:
            x = layer(x)
        return self.head(tanh(self.perceptron(x)))
