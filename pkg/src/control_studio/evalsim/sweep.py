"""Robustness sweep: RMSE as a function of the number of random driving
values, per model, with bootstrap intervals.

The trial set (transplant pairs and driven slots) is shared across models so
curves differ only through the models themselves. A requested K larger than
a sentence's 3T grid is clamped, and the clamping is recorded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..corpus import TransplantPair, transplant_pairs
from .metrics import bootstrap_ci, rmse
from .simulate import ControlTrial, EvalContext, crude_control, random_slots, simulate_control

__all__ = ["SweepEntry", "SweepReport", "robustness_sweep", "DEFAULT_K_GRID"]

DEFAULT_K_GRID = (0, 6, 12, 36, 72, 256)


@dataclass(frozen=True)
class SweepEntry:
    k_requested: int
    mean: float
    ci_low: float
    ci_high: float
    n_trials: int
    clamped_trials: int
    rmses: tuple[float, ...] = field(repr=False, default=())


@dataclass
class SweepReport:
    k_grid: tuple[int, ...]
    trials_per_k: int
    seed: int
    models: dict[str, dict[int, SweepEntry]]

    def curve(self, label: str) -> np.ndarray:
        return np.array([self.models[label][k].mean for k in self.k_grid])


def robustness_sweep(bundles: dict[str, object], ctx: EvalContext,
                     k_grid=DEFAULT_K_GRID, trials_per_k: int = 24,
                     seed: int = 0, crude_labels: tuple[str, ...] = ()) -> SweepReport:
    """Evaluate every bundle on the shared trial set for every K.

    ``crude_labels`` names entries in ``bundles`` that hold nocontrol
    checkpoints to be driven through overwrite-based crude control.
    """
    pairs = transplant_pairs(ctx.corpus, seed)
    if not pairs:
        raise ValueError("no transplant pairs; corpus has too few test renditions")
    rng = np.random.default_rng(seed)
    chosen = [pairs[int(rng.integers(0, len(pairs)))] for _ in range(trials_per_k)]

    # Shared slot draws: per (trial, K) so every model sees identical trials.
    slot_sets: dict[int, list[tuple]] = {}
    clamped: dict[int, int] = {}
    for k in k_grid:
        slot_sets[k] = []
        clamped[k] = 0
        for pair in chosen:
            t = ctx.sentence(pair.sentence_id).length
            k_eff = min(k, 3 * t)
            if k_eff < k:
                clamped[k] += 1
            slot_sets[k].append(random_slots(t, k_eff, rng))

    models: dict[str, dict[int, SweepEntry]] = {}
    for label, bundle in bundles.items():
        per_k: dict[int, SweepEntry] = {}
        for k in k_grid:
            errs = []
            for pair, slots in zip(chosen, slot_sets[k]):
                trial = ControlTrial(pair.sentence_id, pair.driving_actor,
                                     pair.target_speaker, slots)
                if label in crude_labels:
                    pred = crude_control(bundle, ctx, trial)
                else:
                    pred = simulate_control(bundle, ctx, trial)
                truth = ctx.normalized_paf(pair.sentence_id, pair.driving_actor)
                errs.append(rmse(pred, truth))
            lo, hi = bootstrap_ci(errs, seed=seed + k)
            per_k[k] = SweepEntry(k, float(np.mean(errs)), lo, hi,
                                  len(errs), clamped[k], tuple(errs))
        models[label] = per_k
    return SweepReport(tuple(k_grid), trials_per_k, seed, models)
