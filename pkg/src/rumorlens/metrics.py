"""Three-class evaluation: confusion matrix, macro metrics, rumour-positive ROC/AUC.

Precision and recall average the three one-vs-rest values with equal weight;
a class whose denominator is zero contributes 0.  F1 is the harmonic mean of
the *macro* precision and *macro* recall, not an average of per-class F1s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from rumorlens.core import N_LABELS, Label
from rumorlens.exceptions import DegenerateLabels, EmptyMatrix, MalformedCurve


@dataclass(frozen=True, eq=False)
class ConfusionMatrix3:
    """``F[i][j]`` counts samples of actual label ``i`` predicted as ``j``."""

    F: np.ndarray = field(default_factory=lambda: np.zeros((N_LABELS, N_LABELS), dtype=np.int64))

    def __post_init__(self):
        F = np.array(self.F, dtype=np.int64)
        if F.shape != (N_LABELS, N_LABELS) or np.any(F < 0):
            raise ValueError("confusion matrix must be 3x3 with non-negative counts")
        F.flags.writeable = False
        object.__setattr__(self, "F", F)

    @property
    def N(self) -> int:
        return int(self.F.sum())

    def binary_counts(self, positive: Label = Label.RUMOR) -> dict:
        """TP/FP/TN/FN with ``positive`` as the positive class and the rest negative."""
        p = int(positive)
        tp = int(self.F[p, p])
        fn = int(self.F[p].sum()) - tp
        fp = int(self.F[:, p].sum()) - tp
        tn = self.N - tp - fn - fp
        return {"tp": tp, "fp": fp, "tn": tn, "fn": fn}

    def to_list(self) -> list:
        return self.F.tolist()


@dataclass(frozen=True)
class RocPoint:
    fpr: float
    tpr: float
    threshold: float

    def to_dict(self) -> dict:
        thr = self.threshold if math.isfinite(self.threshold) else None
        return {"fpr": self.fpr, "tpr": self.tpr, "threshold": thr}


def accumulate(pairs: Iterable[tuple]) -> ConfusionMatrix3:
    F = np.zeros((N_LABELS, N_LABELS), dtype=np.int64)
    for actual, predicted in pairs:
        F[int(Label.coerce(actual)), int(Label.coerce(predicted))] += 1
    return ConfusionMatrix3(F)


def _require_samples(m: ConfusionMatrix3):
    if m.N == 0:
        raise EmptyMatrix("metrics are undefined for an empty confusion matrix")


def _ratio(num, den) -> float:
    return num / den if den else 0.0


def accuracy(m: ConfusionMatrix3) -> float:
    _require_samples(m)
    return float(np.trace(m.F)) / m.N


def macro_precision(m: ConfusionMatrix3) -> float:
    _require_samples(m)
    col = m.F.sum(axis=0)
    return sum(_ratio(int(m.F[j, j]), int(col[j])) for j in range(N_LABELS)) / N_LABELS


def macro_recall(m: ConfusionMatrix3) -> float:
    _require_samples(m)
    row = m.F.sum(axis=1)
    return sum(_ratio(int(m.F[i, i]), int(row[i])) for i in range(N_LABELS)) / N_LABELS


def f1(m: ConfusionMatrix3) -> float:
    p, r = macro_precision(m), macro_recall(m)
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def roc_curve(scored: Sequence[tuple]) -> list[RocPoint]:
    """ROC points for ``(score, actual_label)`` pairs with Rumor as the positive class.

    Thresholds sweep the distinct scores from high to low; equal scores cross
    the threshold together.  The first point is ``(0, 0)`` at an infinite
    threshold and the last is ``(1, 1)``.
    """
    scores = np.array([float(s) for s, _ in scored], dtype=np.float64)
    positive = np.array([Label.coerce(a) == Label.RUMOR for _, a in scored], dtype=bool)
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("ROC needs at least one rumour and one non-rumour sample")

    order = np.argsort(-scores, kind="stable")
    scores, positive = scores[order], positive[order]
    points = [RocPoint(0.0, 0.0, math.inf)]
    tp = fp = 0
    i = 0
    while i < len(scores):
        thr = scores[i]
        while i < len(scores) and scores[i] == thr:
            tp += int(positive[i])
            fp += int(not positive[i])
            i += 1
        points.append(RocPoint(fp / n_neg, tp / n_pos, float(thr)))
    return points


def auc(points: Sequence[RocPoint]) -> float:
    """Trapezoidal area under an ROC curve running from (0, 0) to (1, 1)."""
    if len(points) < 2:
        raise MalformedCurve("an ROC curve needs at least its two endpoints")
    first, last = points[0], points[-1]
    if (first.fpr, first.tpr) != (0.0, 0.0) or (last.fpr, last.tpr) != (1.0, 1.0):
        raise MalformedCurve("ROC curve must start at (0, 0) and end at (1, 1)")
    area = 0.0
    for a, b in zip(points, points[1:]):
        if b.fpr < a.fpr or b.tpr < a.tpr:
            raise MalformedCurve("ROC points must be non-decreasing in both rates")
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0
    return area


def metrics_report(actual: Sequence, predicted: Sequence, scores: Optional[Sequence[float]] = None) -> dict:
    """All evaluation numbers for one run, ready for JSON."""
    m = accumulate(zip(actual, predicted))
    report = {
        "n": m.N,
        "accuracy": accuracy(m),
        "precision": macro_precision(m),
        "recall": macro_recall(m),
        "f1": f1(m),
        "confusion_matrix": m.to_list(),
        "auc": None,
        "roc": [],
    }
    if scores is not None:
        try:
            curve = roc_curve(list(zip(scores, actual)))
        except DegenerateLabels:
            curve = None
        if curve is not None:
            report["auc"] = auc(curve)
            report["roc"] = [p.to_dict() for p in curve]
    return report


def format_report(report: dict) -> str:
    """Plain-text rendering of :func:`metrics_report` output."""
    rows = [(name, report[name]) for name in ("accuracy", "precision", "recall", "f1", "auc")]
    width = max(len(name) for name, _ in rows)
    lines = [f"{'metric':<{width}}  value", f"{'-' * width}  ------"]
    for name, value in rows:
        shown = "n/a" if value is None else f"{value:.5f}"
        lines.append(f"{name:<{width}}  {shown}")
    lines.append("")
    lines.append("confusion (rows actual, cols predicted)")
    header = "".join(f"{lab.name.lower():>11}" for lab in Label)
    lines.append(f"{'':>11}{header}")
    for lab, row in zip(Label, report["confusion_matrix"]):
        lines.append(f"{lab.name.lower():>11}" + "".join(f"{v:>11d}" for v in row))
    return "\n".join(lines)
