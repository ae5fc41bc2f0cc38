"""Stimulus export for a downstream A/B/reference listening comparison.

For each transplant pair two predictions are written (condition A with a
small driven set, condition B with none) plus the driving rendition as the
reference, and a manifest line ties the three together. The listening test
itself is out of scope here; these files are its input.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..paf import STREAMS
from .simulate import ControlTrial, EvalContext, random_slots, simulate_control

__all__ = ["export_stimuli"]


def _write_paf(path: Path, paf: np.ndarray) -> None:
    lines = ["position\t" + "\t".join(STREAMS)]
    for pos, row in enumerate(paf):
        lines.append(f"{pos}\t" + "\t".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def export_stimuli(bundle, ctx: EvalContext, pairs, out_dir: str | Path,
                   k_a: int = 4, k_b: int = 0, seed: int = 0) -> list[dict]:
    """Write per-pair stimulus files and the manifest; returns the manifest rows."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    rows = []
    for i, pair in enumerate(pairs):
        sent = ctx.sentence(pair.sentence_id)
        t = sent.length
        slots_a = random_slots(t, min(k_a, 3 * t), rng)
        slots_b = random_slots(t, min(k_b, 3 * t), rng) if k_b else ()
        pred_a = simulate_control(bundle, ctx, ControlTrial(
            pair.sentence_id, pair.driving_actor, pair.target_speaker, slots_a))
        pred_b = simulate_control(bundle, ctx, ControlTrial(
            pair.sentence_id, pair.driving_actor, pair.target_speaker, slots_b))
        reference = ctx.normalized_paf(pair.sentence_id, pair.driving_actor)

        pair_id = f"pair{i:04d}"
        paths = {}
        for tag, paf in (("a", pred_a), ("b", pred_b), ("ref", reference)):
            p = out_dir / f"{pair_id}_{tag}.tsv"
            _write_paf(p, paf)
            paths[tag] = p.name
        rows.append({
            "pair_id": pair_id,
            "path_a": paths["a"],
            "path_b": paths["b"],
            "path_ref": paths["ref"],
            "sentence_id": pair.sentence_id,
            "driving_actor": pair.driving_actor,
            "target_speaker": pair.target_speaker,
        })
    manifest = out_dir / "manifest.jsonl"
    manifest.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return rows
