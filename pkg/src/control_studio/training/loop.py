"""Training loops for the three model families.

Examples are visited one at a time with gradients accumulated over the
batch, so ragged sentence lengths need no padding. Driving sets during
MICVAE training come from the example's own PAFs, with the same driving and
target speaker; the masked family instead sees its configured random
masking, which is what teaches it sparse control.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from ..autodiff import Adam, backward, clip_grad_norm, mse, scale
from ..corpus import Corpus, compute_speaker_stats, normalize_renditions
from ..models import ModelConfig, build_model, sample_training_mask
from ..models.masked import build_masked_input
from ..paf import DrivingSet
from .checkpoint import TrainedBundle
from .objective import elbo_nodes, reparameterize_nodes

log = logging.getLogger(__name__)

__all__ = ["TrainSchedule", "train"]


@dataclass(frozen=True)
class TrainSchedule:
    epochs: int = 30
    batch_size: int = 16
    lr: float = 1e-3
    beta: float = 0.01
    beta_warmup_frac: float = 0.2
    lr_end_factor: float = 1.0  # 1.0: constant lr; <1: linear decay to lr*factor
    driving_policy: str = "subset"  # or "full"
    subset_p: float | None = None  # None: resample the keep rate per example
    mask_percent: float = 50.0  # masked family: % of slots masked OUT
    grad_clip: float = 5.0
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.subset_p is not None and not (0.0 <= self.subset_p <= 1.0):
            raise ValueError("subset probability must lie in [0, 1]")
        if not (0.0 <= self.mask_percent <= 100.0):
            raise ValueError("mask percentage must lie in [0, 100]")
        if not (0.0 <= self.beta_warmup_frac <= 1.0):
            raise ValueError("beta warm-up fraction must lie in [0, 1]")
        if self.driving_policy not in ("full", "subset"):
            raise ValueError(f"unknown driving policy {self.driving_policy!r}")


def _training_bag(paf: np.ndarray, schedule: TrainSchedule,
                  rng: np.random.Generator) -> DrivingSet:
    """Driving set for one training example.

    "full" drives every slot. "subset" keeps each slot with probability p,
    where p is resampled uniformly per example unless pinned; the occasional
    empty bag is what trains the empty-bag latent.
    """
    if schedule.driving_policy == "full":
        return DrivingSet.from_paf(paf)
    t = paf.shape[0]
    p = schedule.subset_p if schedule.subset_p is not None else rng.random()
    keep = rng.random((t, 3)) < p
    slots = [(pos, s) for pos in range(t) for s in range(3) if keep[pos, s]]
    return DrivingSet.from_paf(paf, slots)


def _example_loss(model, sent, rend, beta, schedule, rng):
    """Build the scalar loss graph for one normalised rendition."""
    family = model.family
    if family == "nocontrol":
        content = model.content_stack(sent.phone_ids, rend.actor_id, sent.style_id, True)
        pred = model.decoder(None, content)
        rec = mse(pred, rend.paf)
        return rec, float(rec.data), 0.0

    if family == "micvae":
        ds = _training_bag(rend.paf, schedule, rng)
        mu, logvar, _ = model.mi_encoder.encode_values(ds, sent.length)
    elif family == "masked":
        ds = sample_training_mask(rend.paf, schedule.mask_percent, rng)
        mu, logvar = model.masked_encoder.encode_values(build_masked_input(ds, sent.length))
    else:
        raise ValueError(f"unknown family {family!r}")

    eps = rng.standard_normal(model.cfg.latent_dim)
    z = reparameterize_nodes(mu, logvar, eps)
    content = model.content_stack(sent.phone_ids, rend.actor_id, sent.style_id, True)
    pred = model.decoder(z, content)
    total, terms = elbo_nodes(pred, rend.paf, mu, logvar, beta)
    return total, terms.reconstruction, terms.kl


def _snapshot(model) -> dict[str, np.ndarray]:
    snap = {name: p.data.copy() for name, p in model.named_params().items()}
    for name, arr in model.state_blobs().items():
        snap[f"state/{name}"] = arr.copy()
    return snap


def _restore(model, snap: dict[str, np.ndarray]) -> None:
    for name, p in model.named_params().items():
        p.value.data = snap[name].copy()
    model.load_state({name[len("state/"):]: snap[name]
                      for name in snap if name.startswith("state/")})


def train(corpus: Corpus, config: ModelConfig, schedule: TrainSchedule,
          corpus_ref: str = "") -> TrainedBundle:
    """Train one model family on the corpus's training split."""
    schedule.validate()
    stats = compute_speaker_stats(corpus)
    examples = normalize_renditions(corpus.split_renditions("train"), stats)
    if not examples:
        raise ValueError("corpus has no training renditions")

    model = build_model(config, seed=schedule.seed)
    rng = np.random.default_rng(schedule.seed + 1)
    optim = Adam(model.trainable_params(), lr=schedule.lr)
    optim.zero_grad()

    steps_per_epoch = max(1, int(np.ceil(len(examples) / schedule.batch_size)))
    total_steps = schedule.epochs * steps_per_epoch
    warmup = max(1, int(schedule.beta_warmup_frac * total_steps)) if total_steps else 1

    def beta_at(step: int) -> float:
        return schedule.beta * min(1.0, step / warmup)

    def lr_at(step: int) -> float:
        if total_steps <= 1 or schedule.lr_end_factor >= 1.0:
            return schedule.lr
        frac = step / max(1, total_steps - 1)
        return schedule.lr * (1.0 - (1.0 - schedule.lr_end_factor) * frac)

    probe = examples[:min(64, len(examples))]
    init_rng = np.random.default_rng(schedule.seed + 2)
    init_losses = []
    for rend in probe:
        sent = corpus.sentences[rend.sentence_id]
        total, _, _ = _example_loss(model, sent, rend, schedule.beta, schedule, init_rng)
        init_losses.append(float(total.data))
    init_loss = float(np.mean(init_losses))

    history: list[dict] = []
    aborted = False
    last_good = _snapshot(model)
    step = 0
    for epoch in range(schedule.epochs):
        order = rng.permutation(len(examples))
        epoch_tot, epoch_rec, epoch_kl, seen = 0.0, 0.0, 0.0, 0
        diverged = False
        for start in range(0, len(order), schedule.batch_size):
            batch = order[start:start + schedule.batch_size]
            beta = beta_at(step)
            batch_tot = 0.0
            for idx in batch:
                rend = examples[idx]
                sent = corpus.sentences[rend.sentence_id]
                total, rec, kl = _example_loss(model, sent, rend, beta, schedule, rng)
                if not np.isfinite(total.data):
                    diverged = True
                    break
                backward(scale(total, 1.0 / len(batch)))
                batch_tot += float(total.data)
                epoch_rec += rec
                epoch_kl += kl
                seen += 1
            if diverged:
                break
            epoch_tot += batch_tot
            clip_grad_norm(optim.params, schedule.grad_clip)
            optim.lr = lr_at(step)
            optim.step()
            step += 1
        if diverged:
            log.error("training diverged at epoch %d; restoring last good snapshot", epoch)
            _restore(model, last_good)
            aborted = True
            break
        history.append({
            "epoch": epoch,
            "total": epoch_tot / max(1, seen),
            "reconstruction": epoch_rec / max(1, seen),
            "kl": epoch_kl / max(1, seen),
        })
        last_good = _snapshot(model)

    final_loss = history[-1]["total"] if history else init_loss
    metadata = {
        "seed": schedule.seed,
        "steps": step,
        "schedule": asdict(schedule),
        "init_loss": init_loss,
        "final_loss": final_loss,
        "loss_history": history,
        "aborted": aborted,
        "skipped_steps": optim.skipped_steps,
        "corpus_ref": corpus_ref,
    }
    log.info("trained %s: %d steps, loss %.4f -> %.4f%s", config.family, step,
             init_loss, final_loss, " (aborted)" if aborted else "")
    return TrainedBundle(model, config, stats, metadata)
