"""Tabular emission of evaluation results.

Plot tables are UTF-8, tab-delimited, with the fixed column order
(model, x, metric, value, ci_low, ci_high); any plotting tool can consume
them. Reports also round-trip through JSON so tables and figures can be
regenerated without re-running the evaluation.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..paf import STREAMS
from .metrics import bootstrap_ci
from .refine import RefinementTrace
from .sweep import SweepEntry, SweepReport

__all__ = [
    "PLOT_COLUMNS", "sweep_rows", "refinement_rows", "contour_rows",
    "write_plot_table", "write_contour_table",
    "sweep_report_to_json", "sweep_report_from_json",
    "traces_to_json", "traces_from_json", "save_report", "load_report",
]

PLOT_COLUMNS = ("model", "x", "metric", "value", "ci_low", "ci_high")


def sweep_rows(report: SweepReport) -> list[dict]:
    rows = []
    for label in report.models:
        for k in report.k_grid:
            e = report.models[label][k]
            rows.append({"model": label, "x": k, "metric": "rmse_mean",
                         "value": e.mean, "ci_low": e.ci_low, "ci_high": e.ci_high})
    return rows


def refinement_rows(traces: list[RefinementTrace], seed: int = 0) -> list[dict]:
    """Mean refinement curves over pairs, per model, on the common step grid."""
    rows = []
    by_model: dict[str, list[RefinementTrace]] = {}
    for tr in traces:
        by_model.setdefault(tr.model_label, []).append(tr)
    for label, group in by_model.items():
        common = min(len(tr.steps) for tr in group)
        for step in range(common):
            overall = [tr.steps[step].rmse_overall for tr in group]
            lo, hi = bootstrap_ci(overall, seed=seed + step)
            rows.append({"model": label, "x": step, "metric": "rmse_mean",
                         "value": float(np.mean(overall)), "ci_low": lo, "ci_high": hi})
            for stream in STREAMS:
                vals = [tr.steps[step].rmse_streams[stream] for tr in group]
                rows.append({"model": label, "x": step, "metric": f"rmse_{stream}",
                             "value": float(np.mean(vals)),
                             "ci_low": float(np.min(vals)), "ci_high": float(np.max(vals))})
    return rows


def write_plot_table(rows: list[dict], path: str | Path) -> None:
    lines = ["\t".join(PLOT_COLUMNS)]
    for row in rows:
        lines.append("\t".join(str(row[c]) for c in PLOT_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def contour_rows(model_label: str, truth: np.ndarray, prediction: np.ndarray,
                 driven_slots) -> list[dict]:
    """Per-sentence contour table: one row per (position, stream)."""
    driven = set(tuple(s) for s in driven_slots)
    rows = []
    for pos in range(truth.shape[0]):
        for s, stream in enumerate(STREAMS):
            rows.append({
                "model": model_label, "position": pos, "stream": stream,
                "truth": float(truth[pos, s]), "prediction": float(prediction[pos, s]),
                "driven": int((pos, s) in driven),
            })
    return rows


def write_contour_table(rows: list[dict], path: str | Path) -> None:
    cols = ("model", "position", "stream", "truth", "prediction", "driven")
    lines = ["\t".join(cols)]
    for row in rows:
        lines.append("\t".join(str(row[c]) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- JSON round trip -------------------------------------------------------

def sweep_report_to_json(report: SweepReport) -> dict:
    return {
        "kind": "sweep",
        "k_grid": list(report.k_grid),
        "trials_per_k": report.trials_per_k,
        "seed": report.seed,
        "models": {
            label: {str(k): {
                "k_requested": e.k_requested, "mean": e.mean,
                "ci_low": e.ci_low, "ci_high": e.ci_high,
                "n_trials": e.n_trials, "clamped_trials": e.clamped_trials,
                "rmses": list(e.rmses),
            } for k, e in per_k.items()}
            for label, per_k in report.models.items()
        },
    }


def sweep_report_from_json(d: dict) -> SweepReport:
    models = {
        label: {int(k): SweepEntry(
            e["k_requested"], e["mean"], e["ci_low"], e["ci_high"],
            e["n_trials"], e["clamped_trials"], tuple(e["rmses"]))
            for k, e in per_k.items()}
        for label, per_k in d["models"].items()
    }
    return SweepReport(tuple(d["k_grid"]), d["trials_per_k"], d["seed"], models)


def traces_to_json(traces: list[RefinementTrace]) -> dict:
    return {
        "kind": "refinement",
        "traces": [{
            "model_label": tr.model_label,
            "sentence_id": tr.sentence_id,
            "driving_actor": tr.driving_actor,
            "target_speaker": tr.target_speaker,
            "steps": [{
                "step": s.step, "driven_count": s.driven_count,
                "chosen": list(s.chosen) if s.chosen else None,
                "rmse_overall": s.rmse_overall, "rmse_streams": s.rmse_streams,
            } for s in tr.steps],
        } for tr in traces],
    }


def traces_from_json(d: dict) -> list[RefinementTrace]:
    from .refine import RefinementStep
    traces = []
    for t in d["traces"]:
        steps = [RefinementStep(s["step"], s["driven_count"],
                                tuple(s["chosen"]) if s["chosen"] else None,
                                s["rmse_overall"], s["rmse_streams"])
                 for s in t["steps"]]
        traces.append(RefinementTrace(t["model_label"], t["sentence_id"],
                                      t["driving_actor"], t["target_speaker"], steps))
    return traces


def save_report(payload: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def load_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
