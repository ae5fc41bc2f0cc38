"""The three model families: MICVAE, MaskedCVAE, NoControl.

All share the content stack and the PAF decoder; they differ only in how
(and whether) sparse driving values reach the latent slot.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Param, Value, const
from ..corpus import SentenceSpec
from ..paf import DrivingSet
from .config import ModelConfig
from .content import ContentStack
from .decoder import PafDecoder
from .masked import MaskedEncoder, build_masked_input
from .mi_encoder import LatentGaussian, MiEncoder


class ModelError(RuntimeError):
    pass


def per_value_weights(weights: np.ndarray) -> np.ndarray:
    """One scalar weight per driving value.

    Scalar-score mode already yields a (K,) simplex. Per-dimension mode
    yields (K, D) with each latent dimension's column summing to 1; the row
    means are reported, which still sum to 1 across the bag.
    """
    if weights.ndim == 2:
        return weights.mean(axis=1)
    return weights


class ProsodyModel:
    """Shared chassis: content encoders + decoder + a parameter registry."""

    family = ""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        if cfg.family != self.family:
            raise ModelError(f"config family {cfg.family!r} does not match {self.family!r}")
        self.cfg = cfg
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.content_stack = ContentStack(rng, cfg)
        self.decoder = PafDecoder(rng, cfg)
        self._extra_modules(rng)
        self._registry: dict[str, Param] = {}
        for module in self._modules():
            for name, param in module.named_params().items():
                if name in self._registry:
                    raise ModelError(f"duplicate parameter name {name!r}")
                self._registry[name] = param

    def _extra_modules(self, rng: np.random.Generator) -> None:
        pass

    def _modules(self) -> list:
        return [self.content_stack, self.decoder]

    def named_params(self) -> dict[str, Param]:
        return dict(self._registry)

    def trainable_params(self) -> list[Param]:
        return [p for p in self._registry.values() if p.trainable]

    def param_count(self) -> int:
        return sum(p.data.size for p in self._registry.values())

    def state_blobs(self) -> dict[str, np.ndarray]:
        return self.content_stack.state_blobs()

    def load_state(self, blobs: dict[str, np.ndarray]) -> None:
        self.content_stack.load_state(blobs)

    # --- inference -------------------------------------------------------

    def decode_with_latent(self, sent: SentenceSpec, speaker_id: int, style_id: int,
                           z: np.ndarray | None, training: bool = False) -> Value:
        content = self.content_stack(sent.phone_ids, speaker_id, style_id, training)
        zv = None if z is None else const(np.asarray(z, dtype=np.float64))
        return self.decoder(zv, content)

    def posterior(self, sent: SentenceSpec, ds: DrivingSet) -> LatentGaussian:
        raise ModelError(f"{self.family} has no sparse-conditioning encoder")


class NoControl(ProsodyModel):
    """Default prosody: phones, speaker and style only; latent slot zeroed."""

    family = "nocontrol"

    def predict(self, sent: SentenceSpec, speaker_id: int, style_id: int) -> np.ndarray:
        return self.decode_with_latent(sent, speaker_id, style_id, None).data.copy()


class Micvae(ProsodyModel):
    family = "micvae"

    def _extra_modules(self, rng: np.random.Generator) -> None:
        self.mi_encoder = MiEncoder(rng, self.cfg)

    def _modules(self) -> list:
        return [self.content_stack, self.decoder, self.mi_encoder]

    def posterior(self, sent: SentenceSpec, ds: DrivingSet) -> LatentGaussian:
        lg, _ = self.mi_encoder.encode(ds, sent.length)
        return lg

    def predict(self, sent: SentenceSpec, speaker_id: int, style_id: int,
                ds: DrivingSet, z: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Posterior-mean decode unless an explicit z is supplied; returns
        (paf, attention weight per driving value in bag order)."""
        lg, weights = self.mi_encoder.encode(ds, sent.length)
        latent = lg.mu if z is None else z
        out = self.decode_with_latent(sent, speaker_id, style_id, latent)
        return out.data.copy(), per_value_weights(weights)


class MaskedCvae(ProsodyModel):
    family = "masked"

    def _extra_modules(self, rng: np.random.Generator) -> None:
        self.masked_encoder = MaskedEncoder(rng, self.cfg)

    def _modules(self) -> list:
        return [self.content_stack, self.decoder, self.masked_encoder]

    def posterior(self, sent: SentenceSpec, ds: DrivingSet) -> LatentGaussian:
        mi = build_masked_input(ds, sent.length)
        mu, logvar = self.masked_encoder.encode_values(mi)
        return LatentGaussian(mu.data.copy(), np.exp(0.5 * logvar.data))

    def predict(self, sent: SentenceSpec, speaker_id: int, style_id: int,
                ds: DrivingSet, z: np.ndarray | None = None) -> np.ndarray:
        lg = self.posterior(sent, ds)
        latent = lg.mu if z is None else z
        return self.decode_with_latent(sent, speaker_id, style_id, latent).data.copy()


_FAMILY_CLASSES = {cls.family: cls for cls in (Micvae, MaskedCvae, NoControl)}


def build_model(cfg: ModelConfig, seed: int = 0) -> ProsodyModel:
    try:
        cls = _FAMILY_CLASSES[cfg.family]
    except KeyError:
        raise ModelError(f"unknown model family {cfg.family!r}") from None
    return cls(cfg, seed)
