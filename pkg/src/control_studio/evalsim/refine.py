"""Iterative refinement: a greedy schedule simulating a human who always
fixes the worst slot next.

Starting from an empty driving set, each step pins the (position, stream)
slot where the previous prediction deviates most from the driving rendition
and re-predicts. Ties break by stream order, then position, so traces are
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..paf import STREAMS
from .metrics import rmse, rmse_per_stream
from .simulate import ControlTrial, EvalContext, crude_control, simulate_control

__all__ = ["RefinementStep", "RefinementTrace", "iterative_refinement"]


@dataclass(frozen=True)
class RefinementStep:
    step: int
    driven_count: int
    chosen: tuple[int, int] | None  # slot added at this step; None for step 0
    rmse_overall: float
    rmse_streams: dict[str, float]


@dataclass
class RefinementTrace:
    model_label: str
    sentence_id: str
    driving_actor: int
    target_speaker: int
    steps: list[RefinementStep]

    def curve(self) -> np.ndarray:
        return np.array([s.rmse_overall for s in self.steps])


def _next_slot(residual: np.ndarray, driven: set[tuple[int, int]]) -> tuple[int, int]:
    best = None
    best_err = -1.0
    t = residual.shape[0]
    for s in range(3):  # stream-major order implements the tie-break
        for pos in range(t):
            if (pos, s) in driven:
                continue
            err = residual[pos, s]
            if err > best_err:
                best_err = err
                best = (pos, s)
    assert best is not None
    return best


def iterative_refinement(bundle, ctx: EvalContext, pair, max_steps: int,
                         model_label: str = "", crude: bool = False) -> RefinementTrace:
    """Run the greedy schedule for one transplant pair.

    ``max_steps`` is capped at 3T. With ``crude=True`` the bundle must be a
    nocontrol checkpoint and predictions are overwrite-based.
    """
    sent = ctx.sentence(pair.sentence_id)
    driving = ctx.normalized_paf(pair.sentence_id, pair.driving_actor)
    t = sent.length
    max_steps = min(max_steps, 3 * t)

    driven: list[tuple[int, int]] = []
    steps: list[RefinementStep] = []
    chosen = None
    for step in range(max_steps + 1):
        trial = ControlTrial(pair.sentence_id, pair.driving_actor, pair.target_speaker,
                             tuple(driven))
        if crude:
            pred = crude_control(bundle, ctx, trial)
        else:
            pred = simulate_control(bundle, ctx, trial)
        steps.append(RefinementStep(step, len(driven), chosen,
                                    rmse(pred, driving), rmse_per_stream(pred, driving)))
        if step == max_steps:
            break
        residual = np.abs(pred - driving)
        chosen = _next_slot(residual, set(driven))
        driven.append(chosen)

    return RefinementTrace(model_label, pair.sentence_id, pair.driving_actor,
                           pair.target_speaker, steps)
