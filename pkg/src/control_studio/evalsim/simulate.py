"""Simulated human-in-the-loop control via prosodic feature transplant.

Driving values are lifted from one actor's rendition of a test sentence
while the model is conditioned on a different target speaker; the mismatch
is what separates control through the driving values from control through
the speaker label, so evaluation refuses equal driving and target speakers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..corpus import Corpus, TransplantPair, normalize_renditions
from ..models.families import Micvae, MaskedCvae, NoControl, ProsodyModel
from ..paf import DrivingSet, DrivingValue, STREAMS
from ..training.checkpoint import TrainedBundle
from ..training.objective import reparameterize

__all__ = ["ControlTrial", "EvalContext", "ProtocolError",
           "simulate_control", "crude_control", "random_slots"]


class ProtocolError(RuntimeError):
    """The trial violates the evaluation protocol."""


@dataclass(frozen=True)
class ControlTrial:
    sentence_id: str
    driving_actor: int
    target_speaker: int
    slots: tuple[tuple[int, int], ...]  # (position, stream_index), the driven subset
    latent: str = "mean"  # or "sample"
    noise_seed: int = 0


class EvalContext:
    """Corpus plus normalisation, with test renditions cached in z-space."""

    def __init__(self, corpus: Corpus, stats: dict[int, dict]):
        self.corpus = corpus
        self.stats = stats
        if not corpus.split.test:
            raise ProtocolError("corpus has no test sentences; nothing to evaluate")
        test_ids = set(corpus.split.test)
        renditions = [r for r in corpus.renditions if r.sentence_id in test_ids]
        self._normalized = {(r.sentence_id, r.actor_id): r.paf
                            for r in normalize_renditions(renditions, stats)}

    def sentence(self, sentence_id: str):
        return self.corpus.sentences[sentence_id]

    def normalized_paf(self, sentence_id: str, actor_id: int) -> np.ndarray:
        try:
            return self._normalized[(sentence_id, actor_id)]
        except KeyError:
            raise ProtocolError(
                f"no test rendition of {sentence_id} by actor {actor_id}") from None

    def driving_set(self, trial: ControlTrial) -> DrivingSet:
        paf = self.normalized_paf(trial.sentence_id, trial.driving_actor)
        return DrivingSet([DrivingValue(pos, STREAMS[s], float(paf[pos, s]))
                           for pos, s in trial.slots])


def random_slots(t: int, k: int, rng: np.random.Generator) -> tuple[tuple[int, int], ...]:
    """k distinct (position, stream) slots drawn uniformly from the 3T grid."""
    if k > 3 * t:
        raise ValueError(f"cannot draw {k} slots from a 3T={3 * t} grid")
    flat = rng.choice(3 * t, size=k, replace=False)
    return tuple((int(i // 3), int(i % 3)) for i in sorted(flat))


def _check_trial(ctx: EvalContext, trial: ControlTrial, eval_mode: bool) -> None:
    if eval_mode and trial.driving_actor == trial.target_speaker:
        raise ProtocolError(
            f"evaluation requires mismatched speakers; got driving actor "
            f"{trial.driving_actor} == target speaker {trial.target_speaker}")


def _check_trained(bundle: TrainedBundle) -> None:
    if bundle.metadata.get("steps", 0) <= 0:
        raise ProtocolError("checkpoint has no training steps; simulated "
                            "control needs a trained model")


def simulate_control(bundle: TrainedBundle, ctx: EvalContext, trial: ControlTrial,
                     eval_mode: bool = True) -> np.ndarray:
    """Condition the model on the trial's driving values and target speaker;
    returns the full (T, 3) prediction in normalised units."""
    _check_trial(ctx, trial, eval_mode)
    _check_trained(bundle)
    model = bundle.model
    sent = ctx.sentence(trial.sentence_id)
    ds = ctx.driving_set(trial)
    style = sent.style_id

    if isinstance(model, NoControl):
        if len(ds) > 0:
            raise ProtocolError(
                "nocontrol has no sparse-conditioning input; use crude_control for K > 0")
        return model.predict(sent, trial.target_speaker, style)

    lg = model.posterior(sent, ds)
    z = lg.mu if trial.latent == "mean" else reparameterize(lg, trial.noise_seed)
    return model.decode_with_latent(sent, trial.target_speaker, style, z).data.copy()


def crude_control(nocontrol_bundle: TrainedBundle, ctx: EvalContext,
                  trial: ControlTrial, eval_mode: bool = True) -> np.ndarray:
    """Default prosody with the driven slots overwritten by driving values."""
    _check_trial(ctx, trial, eval_mode)
    _check_trained(nocontrol_bundle)
    model = nocontrol_bundle.model
    if not isinstance(model, NoControl):
        raise ProtocolError("crude_control runs on a nocontrol checkpoint")
    sent = ctx.sentence(trial.sentence_id)
    out = model.predict(sent, trial.target_speaker, sent.style_id)
    driving = ctx.normalized_paf(trial.sentence_id, trial.driving_actor)
    for pos, s in trial.slots:
        out[pos, s] = driving[pos, s]
    return out
