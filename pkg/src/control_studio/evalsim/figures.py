"""Figure rendering for evaluation reports.

Every report path that writes a delimited table can also render the
matching figure to a PNG next to it. Rendering is headless (Agg).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from ..paf import STREAMS
from .refine import RefinementTrace
from .sweep import SweepReport

__all__ = ["render_sweep", "render_refinement", "render_contours"]


def render_sweep(report: SweepReport, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    xs = np.arange(len(report.k_grid))
    for label, per_k in report.models.items():
        means = [per_k[k].mean for k in report.k_grid]
        los = [per_k[k].ci_low for k in report.k_grid]
        his = [per_k[k].ci_high for k in report.k_grid]
        ax.plot(xs, means, marker="o", label=label)
        ax.fill_between(xs, los, his, alpha=0.18)
    ax.set_xticks(xs)
    ax.set_xticklabels([str(k) for k in report.k_grid])
    ax.set_xlabel("driving values provided (K)")
    ax.set_ylabel("RMSE (normalised units)")
    ax.set_title("Robustness to sparsity patterns")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_refinement(traces: list[RefinementTrace], path: str | Path) -> None:
    by_model: dict[str, list[RefinementTrace]] = {}
    for tr in traces:
        by_model.setdefault(tr.model_label, []).append(tr)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, group in by_model.items():
        common = min(len(tr.steps) for tr in group)
        curve = np.array([[tr.steps[i].rmse_overall for i in range(common)] for tr in group])
        mean = curve.mean(axis=0)
        ax.plot(np.arange(common), mean, label=label)
        ax.fill_between(np.arange(common), curve.min(axis=0), curve.max(axis=0), alpha=0.12)
    ax.set_xlabel("driven values (greedy schedule)")
    ax.set_ylabel("RMSE to driving rendition")
    ax.set_title("Control efficiency under iterative refinement")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_contours(truth: np.ndarray, predictions: dict[str, np.ndarray],
                    driven_slots, path: str | Path) -> None:
    """Three stacked panels (f0, energy, duration): reference rendition,
    model predictions, and green markers at the driven slots."""
    driven = set(tuple(s) for s in driven_slots)
    t = truth.shape[0]
    fig, axes = plt.subplots(3, 1, figsize=(7.2, 6.4), sharex=True)
    xs = np.arange(t)
    for s, (ax, stream) in enumerate(zip(axes, STREAMS)):
        if stream == "duration":
            ax.bar(xs, truth[:, s], width=0.8, color="0.85", label="reference")
            for label, pred in predictions.items():
                ax.step(xs, pred[:, s], where="mid", label=label)
        else:
            ax.plot(xs, truth[:, s], color="0.6", marker=".", label="reference")
            for label, pred in predictions.items():
                ax.plot(xs, pred[:, s], marker=".", label=label)
        pinned = [(pos, truth[pos, s]) for (pos, ss) in driven
                  if ss == s and 0 <= pos < t]
        if pinned:
            px, py = zip(*pinned)
            ax.scatter(px, py, color="green", zorder=5, s=48, label="driven")
        ax.set_ylabel(stream)
    axes[-1].set_xlabel("phone position")
    axes[0].legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
