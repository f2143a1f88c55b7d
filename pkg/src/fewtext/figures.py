"""Matplotlib renderings written alongside the delimited artifacts.

Every report path that emits JSONL or CSV also drops a PNG next to it:
loss curves and schedules from the step log, a bar chart from the
ablation grid.  Rendering is file-only (Agg backend); nothing here is
read back by the library.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluate import AblationReport
from .trainer import StepState


def render_loss_curves(states: Sequence[StepState], path: str | Path) -> None:
    steps = [s.step for s in states]
    fig, ax = plt.subplots(figsize=(7, 4))
    for field, label in (
        ("l_total", "total"),
        ("l_ce", "cross entropy"),
        ("l_scl", "supervised contrastive"),
        ("l_con", "consistency"),
        ("l_cc", "contrastive consistency"),
    ):
        ax.plot(steps, [getattr(s, field) for s in states], label=label, linewidth=1.0)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_schedules(states: Sequence[StepState], path: str | Path) -> None:
    steps = [s.step for s in states]
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.plot(steps, [s.lr for s in states], color="tab:blue", label="learning rate")
    ax.set_xlabel("step")
    ax.set_ylabel("learning rate", color="tab:blue")
    twin = ax.twinx()
    twin.plot(steps, [s.alpha for s in states], color="tab:red", label="release weight")
    twin.set_ylabel("release weight", color="tab:red")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_ablation_chart(report: AblationReport, path: str | Path) -> None:
    names = [r.name for r in report.rows]
    means = [r.metrics.mean for r in report.rows]
    sems = [r.metrics.sem for r in report.rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(names)), means, yerr=sems, capsize=4, color="tab:gray")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=15, ha="right")
    ax.set_ylabel("test accuracy (%)")
    lo = max(0.0, min(means) - 5.0)
    ax.set_ylim(lo, 100.0)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
