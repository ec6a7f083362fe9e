"""Ranking metrics over a split: per-class average precision and ROC-AUC.

Average precision follows the ranked-retrieval definition: sort by
descending score (ties broken by ascending sample index), then average the
precision measured at each positive. AUC uses midranks, which is exactly
the trapezoidal area under the ROC curve; constant scores give 0.5.

Classes lacking a positive or a negative example cannot be ranked; they
are dropped from the macro averages and listed in the report.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def average_precision(scores, labels) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    order = np.lexsort((np.arange(len(scores)), -scores))
    ranked = labels[order].astype(bool)
    hits = np.cumsum(ranked)
    ks = np.arange(1, len(scores) + 1)
    return float((hits[ranked] / ks[ranked]).mean())


def _midranks(scores: np.ndarray) -> np.ndarray:
    order = np.argsort(scores, kind="stable")
    _, inverse, counts = np.unique(scores[order], return_inverse=True,
                                   return_counts=True)
    ends = np.cumsum(counts)
    starts = ends - counts + 1
    mid = (starts + ends) / 2.0
    ranks = np.empty(len(scores))
    ranks[order] = mid[inverse]
    return ranks


def roc_auc(scores, labels) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(labels).astype(bool)
    n_pos = int(pos.sum())
    n_neg = len(scores) - n_pos
    ranks = _midranks(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class MetricReport:
    map: float
    auc: float
    per_class_ap: dict = field(default_factory=dict)
    per_class_auc: dict = field(default_factory=dict)
    excluded: list = field(default_factory=list)


def compute_metrics(scores, labels) -> MetricReport:
    """Macro mAP/AUC over classes with both label values present."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 2:
        raise ValueError(f"scores {scores.shape} and labels {labels.shape} "
                         "must be equal 2-D shapes")
    report = MetricReport(map=float("nan"), auc=float("nan"))
    for c in range(scores.shape[1]):
        y = labels[:, c]
        n_pos = int(y.sum())
        if n_pos == 0 or n_pos == len(y):
            report.excluded.append(c)
            continue
        report.per_class_ap[c] = average_precision(scores[:, c], y)
        report.per_class_auc[c] = roc_auc(scores[:, c], y)
    if report.per_class_ap:
        report.map = float(np.mean(list(report.per_class_ap.values())))
        report.auc = float(np.mean(list(report.per_class_auc.values())))
    return report
