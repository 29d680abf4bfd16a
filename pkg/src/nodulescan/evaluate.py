"""Detection metrics: presence precision/recall, size accuracy, confusion.

Presence is binary (predicted size >= 1). Per-size recall conditions on
the true size: the fraction of true-b traces flagged as containing any
nodule. Per-size precision conditions on the predicted size: the fraction
of predicted-b traces that truly contain a nodule of any size. Size
accuracy is computed per true size, exact or within +/-1 mm; there is no
6 mm class, so at tolerance 1 a 5 mm nodule only admits predictions 4 and 5.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .detect import DetectionResult
from .errors import ConfigError, EmptyResults, UndefinedMetric

N_CLASSES = 6
SIZE_CLASSES = (2, 3, 4, 5)


def precision_recall(tp: int, fp: int, fn: int) -> tuple[float, float]:
    """Precision TP/(TP+FP) and recall TP/(TP+FN) from raw counts."""
    if tp < 0 or fp < 0 or fn < 0:
        raise ConfigError("counts must be non-negative")
    if tp + fp == 0:
        raise UndefinedMetric("precision undefined: no positive predictions")
    if tp + fn == 0:
        raise UndefinedMetric("recall undefined: no positive ground truth")
    return tp / (tp + fp), tp / (tp + fn)


def size_accuracy(confusion, tolerance_mm: int = 0) -> dict[int, float | None]:
    """Fraction of predictions within tolerance_mm of the true size.

    Computed for true sizes 2..5. Predictions only range over 0..5, so at
    tolerance 1 the admissible set for a 5 mm nodule is {4, 5}. Sizes with
    no traces report None.
    """
    conf = np.asarray(confusion)
    if conf.shape != (N_CLASSES, N_CLASSES):
        raise ConfigError(f"confusion must be {N_CLASSES}x{N_CLASSES}, got {conf.shape}")
    if tolerance_mm not in (0, 1):
        raise ConfigError(f"tolerance_mm must be 0 or 1, got {tolerance_mm}")
    out: dict[int, float | None] = {}
    for b in SIZE_CLASSES:
        row = conf[b]
        total = int(row.sum())
        if total == 0:
            out[b] = None
            continue
        hits = sum(int(row[p]) for p in range(N_CLASSES) if abs(p - b) <= tolerance_mm)
        out[b] = hits / total
    return out


@dataclass
class EvalReport:
    """Aggregated detection metrics over a labelled result set."""

    confusion: np.ndarray
    per_size_precision: dict[int, float | None]
    per_size_recall: dict[int, float | None]
    exact_acc: dict[int, float | None]
    tol1_acc: dict[int, float | None]
    negatives_breakdown: dict[int, int]
    n_results: int

    def to_json_dict(self) -> dict:
        return {
            "n_results": self.n_results,
            "confusion": [[int(x) for x in row] for row in self.confusion],
            "per_size_precision": {str(b): v for b, v in sorted(self.per_size_precision.items())},
            "per_size_recall": {str(b): v for b, v in sorted(self.per_size_recall.items())},
            "exact_acc": {str(b): v for b, v in sorted(self.exact_acc.items())},
            "tol1_acc": {str(b): v for b, v in sorted(self.tol1_acc.items())},
            "negatives_breakdown": {str(b): v for b, v in sorted(self.negatives_breakdown.items())},
        }


def build_report(results: Sequence[tuple[int, DetectionResult]]) -> EvalReport:
    """Assemble the confusion matrix and every derived rate.

    results pairs each trace's true size with its DetectionResult. Rates
    whose denominator is empty are reported as None rather than 0.
    """
    if len(results) == 0:
        raise EmptyResults("no detection results to aggregate")
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=int)
    for true_b, det in results:
        if true_b not in range(N_CLASSES):
            raise ConfigError(f"true size must be in 0..5, got {true_b}")
        confusion[true_b, det.predicted_b] += 1

    recall: dict[int, float | None] = {}
    precision: dict[int, float | None] = {}
    for b in range(1, N_CLASSES):
        row_total = int(confusion[b].sum())
        recall[b] = None if row_total == 0 else int(confusion[b, 1:].sum()) / row_total
        col_total = int(confusion[:, b].sum())
        precision[b] = None if col_total == 0 else int(confusion[1:, b].sum()) / col_total

    negatives = {
        b: int(confusion[b, 0]) for b in range(1, N_CLASSES) if confusion[b, 0] > 0
    }
    return EvalReport(
        confusion=confusion,
        per_size_precision=precision,
        per_size_recall=recall,
        exact_acc=size_accuracy(confusion, 0),
        tol1_acc=size_accuracy(confusion, 1),
        negatives_breakdown=negatives,
        n_results=len(results),
    )


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.3f}"


def write_report_csv(report: EvalReport, path) -> None:
    """Flat metric,b,value table; absent rates have an empty value field."""
    lines = ["metric,b,value"]
    for b in range(1, N_CLASSES):
        lines.append(f"precision,{b},{_fmt(report.per_size_precision[b])}")
    for b in range(1, N_CLASSES):
        lines.append(f"recall,{b},{_fmt(report.per_size_recall[b])}")
    for b in SIZE_CLASSES:
        lines.append(f"exact_acc,{b},{_fmt(report.exact_acc[b])}")
    for b in SIZE_CLASSES:
        lines.append(f"tol1_acc,{b},{_fmt(report.tol1_acc[b])}")
    for b in range(1, N_CLASSES):
        lines.append(f"negatives,{b},{report.negatives_breakdown.get(b, 0)}")
    Path(path).write_text("\n".join(lines) + "\n")


def render_report_plots(report: EvalReport, out_dir) -> list[str]:
    """Emit static SVG bar charts; returns the written file names."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def heights(d: dict[int, float | None], keys: Iterable[int]) -> list[float]:
        return [0.0 if d.get(k) is None else float(d[k]) for k in keys]

    sizes = list(range(1, N_CLASSES))
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.arange(len(sizes))
    ax.bar(x - 0.2, heights(report.per_size_precision, sizes), width=0.4, label="precision")
    ax.bar(x + 0.2, heights(report.per_size_recall, sizes), width=0.4, label="recall")
    ax.set_xticks(x, [f"{b} mm" for b in sizes])
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("rate")
    ax.set_title("Nodule presence detection by size")
    ax.legend()
    path = out / "precision_recall.svg"
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    written.append(path.name)

    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.arange(len(SIZE_CLASSES))
    ax.bar(x - 0.2, heights(report.exact_acc, SIZE_CLASSES), width=0.4, label="exact")
    ax.bar(x + 0.2, heights(report.tol1_acc, SIZE_CLASSES), width=0.4, label="+/-1 mm")
    ax.set_xticks(x, [f"{b} mm" for b in SIZE_CLASSES])
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("success rate")
    ax.set_title("Size estimation accuracy")
    ax.legend()
    path = out / "size_accuracy.svg"
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    written.append(path.name)

    fig, ax = plt.subplots(figsize=(6, 4))
    keys = sorted(report.negatives_breakdown) or [1]
    ax.bar(
        np.arange(len(keys)),
        [report.negatives_breakdown.get(k, 0) for k in keys],
        width=0.6,
    )
    ax.set_xticks(np.arange(len(keys)), [f"{b} mm" for b in keys])
    ax.set_ylabel("count")
    ax.set_title("True sizes among negative calls")
    path = out / "negatives_breakdown.svg"
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    written.append(path.name)
    return written
