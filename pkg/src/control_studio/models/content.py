"""Content encoders: phone sequence, speaker identity, style label.

The phone path is embedding -> three same-padding convolution banks with
batch norm and ReLU -> bidirectional LSTM. Speaker and style embeddings are
projected up to the phone width, repeated across the sentence, and summed
with the phone embeddings. (The embeddings are narrower than the phone
width, so a learned projection precedes the sum.)
"""

from __future__ import annotations

import numpy as np

from ..autodiff import (
    Value, BatchNormChannels, Conv1dSame, Embedding, Linear, RecurrentLayer, add, relu,
)
from ..autodiff.layers import _Module
from .config import ModelConfig


class ContentStack(_Module):
    def __init__(self, rng: np.random.Generator, cfg: ModelConfig, name: str = "content"):
        super().__init__()
        self.cfg = cfg
        c = cfg.phone_dim
        self.phone_emb = Embedding(rng, cfg.phone_vocab, c, name=f"{name}/phone_emb")
        self.convs = [Conv1dSame(rng, c, c, cfg.conv_kernel, name=f"{name}/conv{i}")
                      for i in range(cfg.conv_banks)]
        self.bns = [BatchNormChannels(c, name=f"{name}/bn{i}") for i in range(cfg.conv_banks)]
        self.lstm = RecurrentLayer(rng, c, c // 2, kind="lstm", direction="bi",
                                   name=f"{name}/lstm")
        self.speaker_emb = Embedding(rng, cfg.speaker_count, cfg.speaker_dim,
                                     name=f"{name}/speaker_emb")
        self.style_emb = Embedding(rng, cfg.style_count, cfg.style_dim,
                                   name=f"{name}/style_emb")
        self.speaker_proj = Linear(rng, cfg.speaker_dim, c, name=f"{name}/speaker_proj")
        self.style_proj = Linear(rng, cfg.style_dim, c, name=f"{name}/style_proj")
        for sub in [self.phone_emb, *self.convs, *self.bns, self.lstm,
                    self.speaker_emb, self.style_emb, self.speaker_proj, self.style_proj]:
            for pname, param in sub.named_params().items():
                self._params[pname] = param

    def encode_phones(self, phone_ids, training: bool) -> Value:
        phone_ids = np.asarray(phone_ids, dtype=np.int64)
        if phone_ids.size < 1:
            raise ValueError("a sentence needs at least one phone")
        x = self.phone_emb(phone_ids)
        for conv, bn in zip(self.convs, self.bns):
            x = relu(bn(conv(x), training))
        return self.lstm(x)

    def encode_speaker(self, speaker_id: int) -> Value:
        return self.speaker_emb(np.array([speaker_id]))[0]

    def encode_style(self, style_id: int) -> Value:
        return self.style_emb(np.array([style_id]))[0]

    def combine(self, phones: Value, speaker: Value, style: Value) -> Value:
        return add(add(phones, self.speaker_proj(speaker)), self.style_proj(style))

    def __call__(self, phone_ids, speaker_id: int, style_id: int, training: bool) -> Value:
        phones = self.encode_phones(phone_ids, training)
        return self.combine(phones, self.encode_speaker(speaker_id),
                            self.encode_style(style_id))

    def state_blobs(self) -> dict[str, np.ndarray]:
        blobs = {}
        for i, bn in enumerate(self.bns):
            for key, arr in bn.state_blobs().items():
                blobs[f"content/bn{i}/{key}"] = arr
        return blobs

    def load_state(self, blobs: dict[str, np.ndarray]) -> None:
        for i, bn in enumerate(self.bns):
            bn.load_state({
                "running_mean": blobs[f"content/bn{i}/running_mean"],
                "running_var": blobs[f"content/bn{i}/running_var"],
            })
