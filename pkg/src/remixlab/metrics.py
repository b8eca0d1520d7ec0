"""Imbalance-aware evaluation: confusion matrix, per-class recall, g-mean,
per-class Brier scores, and the balanced Brier score (their arithmetic mean)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

__all__ = [
    "MetricsReport",
    "evaluate",
    "gain",
    "rank_methods",
    "report_csv_header",
    "report_csv_row",
    "format_report",
]


@dataclass(frozen=True)
class MetricsReport:
    """Evaluation summary for one (model, test split) pair.

    confusion rows are true classes, columns predicted classes. bbs is the
    arithmetic mean of per_class_brier; gmean the geometric mean of
    per_class_recall.
    """

    confusion: np.ndarray
    per_class_recall: tuple[float, ...]
    gmean: float
    per_class_brier: tuple[float, ...]
    bbs: float
    brier_overall: float
    n_evaluated: int

    @property
    def n_classes(self) -> int:
        return len(self.per_class_recall)


def evaluate(probs: np.ndarray, labels: np.ndarray) -> MetricsReport:
    """Score row-stochastic predictions against integer labels.

    Predicted class is the argmax probability (ties go to the lowest index).
    Per-class Brier is the mean of (1 - p_true)^2 within the class; every
    class must appear in labels or that mean is undefined.
    """
    probs = np.asarray(probs, np.float64)
    labels = np.asarray(labels, np.int64)
    if probs.ndim != 2 or probs.shape[1] < 2:
        raise ValueError(f"probs must be N x C with C >= 2, got shape {probs.shape}")
    n, c = probs.shape
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match {n} prediction rows")
    if np.any(probs < -1e-9) or np.any(probs > 1 + 1e-9):
        raise ValueError("probabilities outside [0, 1]")
    if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6):
        raise ValueError("probability rows do not sum to 1")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"labels outside 0..{c - 1}")

    counts = np.bincount(labels, minlength=c)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise ValueError(
            f"class {missing[0]} has no evaluation instances; per-class Brier is undefined"
        )

    predicted = probs.argmax(axis=1)
    confusion = np.zeros((c, c), np.int64)
    np.add.at(confusion, (labels, predicted), 1)

    recalls = confusion.diagonal() / counts
    if c == 2:
        gmean = float(np.sqrt(recalls[0] * recalls[1]))
    elif np.any(recalls == 0.0):
        gmean = 0.0
    else:
        gmean = float(np.prod(recalls) ** (1.0 / c))

    true_prob = probs[np.arange(n), labels]
    sq_err = (1.0 - true_prob) ** 2
    per_class_brier = np.array(
        [sq_err[labels == j].mean() for j in range(c)]
    )
    return MetricsReport(
        confusion=confusion,
        per_class_recall=tuple(float(r) for r in recalls),
        gmean=gmean,
        per_class_brier=tuple(float(b) for b in per_class_brier),
        bbs=float(per_class_brier.mean()),
        brier_overall=float(sq_err.mean()),
        n_evaluated=n,
    )


def gain(report_method: MetricsReport, report_baseline: MetricsReport) -> tuple[float, float]:
    """(gm_gain, bbs_gain) of a method over a baseline on the same split.

    Both are positive when the method is better: gm_gain = method - baseline,
    bbs_gain = baseline - method (lower bbs wins).
    """
    return (
        report_method.gmean - report_baseline.gmean,
        report_baseline.bbs - report_method.bbs,
    )


def rank_methods(scores, higher_is_better: bool) -> list[float]:
    """Rank competing scores, 1 = best, ties sharing the average rank."""
    scores = np.asarray(scores, np.float64)
    if scores.ndim != 1 or scores.size < 2:
        raise ValueError(f"need at least 2 scores to rank, got shape {scores.shape}")
    keyed = -scores if higher_is_better else scores
    return [float(r) for r in rankdata(keyed)]


def report_csv_header(n_classes: int) -> list[str]:
    """Column order for report_csv_row."""
    return (
        ["n_evaluated", "gmean", "bbs", "brier_overall"]
        + [f"recall_{j}" for j in range(n_classes)]
        + [f"brier_{j}" for j in range(n_classes)]
    )


def report_csv_row(report: MetricsReport) -> list[str]:
    """Flat values matching report_csv_header(report.n_classes)."""
    return (
        [str(report.n_evaluated), repr(report.gmean), repr(report.bbs),
         repr(report.brier_overall)]
        + [repr(r) for r in report.per_class_recall]
        + [repr(b) for b in report.per_class_brier]
    )


def format_report(report: MetricsReport, class_names=None) -> str:
    """Human-readable multi-line summary."""
    c = report.n_classes
    names = [str(x) for x in class_names] if class_names else [str(j) for j in range(c)]
    if len(names) != c:
        raise ValueError(f"got {len(names)} class names for {c} classes")
    width = max(len(s) for s in names)
    lines = [
        f"samples evaluated: {report.n_evaluated}",
        f"g-mean:            {report.gmean:.6f}",
        f"balanced Brier:    {report.bbs:.6f}",
        f"overall Brier:     {report.brier_overall:.6f}",
        "per-class recall / Brier:",
    ]
    for j in range(c):
        lines.append(
            f"  {names[j]:>{width}}  recall={report.per_class_recall[j]:.6f}"
            f"  brier={report.per_class_brier[j]:.6f}"
        )
    lines.append("confusion matrix (rows = true class):")
    cell = max(width, max(len(str(v)) for v in report.confusion.ravel()))
    header = " " * (width + 2) + " ".join(f"{s:>{cell}}" for s in names)
    lines.append(header)
    for j in range(c):
        row = " ".join(f"{int(v):>{cell}}" for v in report.confusion[j])
        lines.append(f"  {names[j]:>{width}} {row}")
    return "\n".join(lines)
