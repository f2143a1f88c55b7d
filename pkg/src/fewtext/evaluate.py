"""Accuracy, multi-seed aggregation, the ablation grid, and exports.

Accuracy always recomputes logits from a model checkpoint; the CSV
embedding export is a one-way artifact for external analysis and is
never read back by any evaluation path.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace as dc_replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import RunConfig, fingerprint
from .corpus import CorpusSplit, Example, LabelMap
from .encoder import EncoderParams, encode, featurize_example
from .errors import ContractError
from .trainer import TrainResult, train


def accuracy(params: EncoderParams, examples: Sequence[Example]) -> float:
    """Percentage of examples whose argmax logit hits the true label."""
    if not examples:
        raise ContractError("accuracy needs at least one example")
    hits = 0
    for ex in examples:
        if ex.label is None:
            raise ContractError(f"example {ex.id} has no label")
        _, logits = encode(params, featurize_example(params, ex.text))
        if int(np.argmax(logits.data)) == ex.label:
            hits += 1
    return 100.0 * hits / len(examples)


@dataclass
class RunMetrics:
    """Accuracy of one or more runs sharing a configuration."""

    per_seed_accuracy: list[float]
    mean: float
    sem: float
    config_fingerprint: str = ""


def single_run_metrics(acc: float, config_fingerprint: str = "") -> RunMetrics:
    return RunMetrics([acc], mean=acc, sem=0.0, config_fingerprint=config_fingerprint)


def aggregate(runs: Sequence[RunMetrics]) -> RunMetrics:
    """Pool runs: mean and standard error of the mean over all seeds.

    SEM uses the sample standard deviation (ddof 1) divided by sqrt(k).
    """
    if len(runs) < 2:
        raise ContractError("aggregate needs at least two runs")
    prints = {r.config_fingerprint for r in runs}
    if len(prints) != 1:
        raise ContractError(f"runs come from differing configurations: {sorted(prints)}")
    accs = [a for r in runs for a in r.per_seed_accuracy]
    k = len(accs)
    mean = float(np.mean(accs))
    sem = float(math.sqrt(np.var(accs, ddof=1) / k))
    return RunMetrics(accs, mean=mean, sem=sem, config_fingerprint=runs[0].config_fingerprint)


def format_metrics(metrics: RunMetrics) -> str:
    return f"{metrics.mean:.2f}±{metrics.sem:.2f}"


# -- ablation ------------------------------------------------------------------

# Row name -> the weight that gets zeroed.  "CON" is the consistency
# (KL) term, turned off via lambda_con.
ABLATION_ROWS: tuple[tuple[str, str | None], ...] = (
    ("full", None),
    ("w/o. SCL", "lambda_scl"),
    ("w/o. CC", "lambda_cc"),
    ("w/o. CON", "lambda_con"),
)

ABLATION_NOTE = "CON denotes the consistency (KL) term; CC the contrastive-consistency term."


@dataclass
class AblationRow:
    name: str
    zeroed: str | None
    metrics: RunMetrics


@dataclass
class AblationReport:
    rows: list[AblationRow]
    note: str = ABLATION_NOTE

    def row(self, name: str) -> AblationRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


def run_config_over_splits(
    config: RunConfig,
    splits: Sequence[CorpusSplit],
    label_map: LabelMap,
) -> tuple[RunMetrics, list[TrainResult]]:
    """Train once per split (seed taken from the split), score dev-best on test."""
    per_run = []
    results = []
    for split in splits:
        if not split.test:
            raise ContractError("ablation splits need a test set")
        cfg = config.replace(seed=split.seed)
        result = train(split, cfg, label_map)
        acc = accuracy(result.best_params, split.test)
        per_run.append(single_run_metrics(acc, fingerprint(cfg)))
        results.append(result)
    if len(per_run) == 1:
        return per_run[0], results
    return aggregate(per_run), results


def ablate(
    config: RunConfig,
    splits: Sequence[CorpusSplit],
    label_map: LabelMap,
) -> AblationReport:
    """Full objective plus the three leave-one-term-out configurations."""
    rows = []
    for name, zeroed in ABLATION_ROWS:
        cfg = config if zeroed is None else config.replace(**{zeroed: 0.0})
        metrics, _ = run_config_over_splits(cfg, splits, label_map)
        rows.append(AblationRow(name=name, zeroed=zeroed, metrics=metrics))
    return AblationReport(rows=rows)


def render_ablation_table(report: AblationReport) -> str:
    """Aligned text table, one row per configuration."""
    name_width = max(len(r.name) for r in report.rows)
    lines = [f"{'configuration'.ljust(name_width)}  test accuracy (%)"]
    for r in report.rows:
        lines.append(f"{r.name.ljust(name_width)}  {format_metrics(r.metrics)}")
    lines.append("")
    lines.append(report.note)
    return "\n".join(lines) + "\n"


def ablation_to_json(report: AblationReport) -> dict:
    return {
        "note": report.note,
        "rows": [
            {
                "name": r.name,
                "zeroed": r.zeroed,
                "mean": r.metrics.mean,
                "sem": r.metrics.sem,
                "per_seed": r.metrics.per_seed_accuracy,
            }
            for r in report.rows
        ],
    }


# -- embedding export ----------------------------------------------------------


def export_embeddings(params: EncoderParams, examples: Sequence[Example], path: str | Path) -> None:
    """CSV of unit embeddings: id,label,z0..z{d-1}.

    Floats are written with repr (shortest round-trip), so re-exporting
    the same model over the same examples is byte-identical.
    """
    if not examples:
        raise ContractError("export_embeddings needs at least one example")
    d = params.embedding_dim
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label"] + [f"z{i}" for i in range(d)])
        for ex in examples:
            z, _ = encode(params, featurize_example(params, ex.text))
            label = "" if ex.label is None else str(ex.label)
            writer.writerow([ex.id, label] + [repr(float(v)) for v in z.data])
