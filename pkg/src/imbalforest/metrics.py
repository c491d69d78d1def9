"""Confusion matrix, per-class precision/recall/F1, ROC curve and AUC."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ImbalForestError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ImbalForestError("confusion counts must be nonnegative")
        if self.total < 1:
            raise ImbalForestError("confusion matrix is empty")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


@dataclass(frozen=True)
class ClassMetrics:
    """One row of the report. ``None`` marks a 0/0 cell (undefined)."""

    precision: float | None
    recall: float | None
    f1: float | None
    support: int

    @property
    def undefined(self) -> tuple[str, ...]:
        return tuple(k for k in ("precision", "recall", "f1") if getattr(self, k) is None)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
            "undefined": list(self.undefined),
        }


def _class_metrics(tp: int, fp: int, fn: int) -> ClassMetrics:
    # 2tp/(2tp+fp+fn) equals the harmonic mean whenever precision and recall exist
    return ClassMetrics(
        precision=_ratio(tp, tp + fp),
        recall=_ratio(tp, tp + fn),
        f1=_ratio(2 * tp, 2 * tp + fp + fn),
        support=tp + fn,
    )


@dataclass(frozen=True)
class ClassReport:
    legit: ClassMetrics
    fraud: ClassMetrics
    accuracy: float

    def __getitem__(self, cls: int) -> ClassMetrics:
        return (self.legit, self.fraud)[cls]

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "0": self.legit.to_dict(), "1": self.fraud.to_dict()}

    def table(self, digits: int = 2) -> str:
        def cell(v: float | None) -> str:
            return "undef" if v is None else f"{v:.{digits}f}"

        lines = [f"{'class':<14}{'precision':>10}{'recall':>10}{'f1-score':>10}{'support':>10}"]
        for name, m in (("0 (not fraud)", self.legit), ("1 (fraud)", self.fraud)):
            lines.append(
                f"{name:<14}{cell(m.precision):>10}{cell(m.recall):>10}{cell(m.f1):>10}{m.support:>10}"
            )
        lines.append(f"{'accuracy':<14}{'':>20}{cell(self.accuracy):>10}")
        return "\n".join(lines)


def _binary_vector(values: Sequence[int], name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ImbalForestError(f"{name} must be a 1-D vector")
    if not np.all((arr == 0) | (arr == 1)):
        raise ImbalForestError(f"{name} contains values other than 0 and 1")
    return arr.astype(np.int8)


def confusion(y_true: Sequence[int], y_pred: Sequence[int]) -> ConfusionMatrix:
    t = _binary_vector(y_true, "y_true")
    p = _binary_vector(y_pred, "y_pred")
    if len(t) != len(p):
        raise ImbalForestError(f"length mismatch: {len(t)} labels vs {len(p)} predictions")
    if len(t) == 0:
        raise ImbalForestError("confusion needs at least one prediction")
    return ConfusionMatrix(
        tp=int(np.sum((t == 1) & (p == 1))),
        tn=int(np.sum((t == 0) & (p == 0))),
        fp=int(np.sum((t == 0) & (p == 1))),
        fn=int(np.sum((t == 1) & (p == 0))),
    )


def class_report(cm: ConfusionMatrix) -> ClassReport:
    """Per-class metrics; class 0 swaps the roles of the two classes."""
    return ClassReport(
        legit=_class_metrics(cm.tn, cm.fn, cm.fp),
        fraud=_class_metrics(cm.tp, cm.fp, cm.fn),
        accuracy=(cm.tp + cm.tn) / cm.total,
    )


@dataclass(frozen=True, eq=False)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def to_csv(self) -> str:
        lines = ["threshold,fpr,tpr"]
        for t, f, r in zip(self.thresholds.tolist(), self.fpr.tolist(), self.tpr.tolist()):
            lines.append(f"{t!r},{f!r},{r!r}")
        return "\n".join(lines) + "\n"


def auc(curve_or_fpr: RocCurve | Sequence[float], tpr: Sequence[float] | None = None) -> float:
    """Trapezoidal area under the (fpr, tpr) polyline."""
    if isinstance(curve_or_fpr, RocCurve):
        x, y = curve_or_fpr.fpr, curve_or_fpr.tpr
    else:
        x, y = np.asarray(curve_or_fpr, dtype=float), np.asarray(tpr, dtype=float)
    area = 0.0
    for i in range(1, len(x)):
        area += (x[i] - x[i - 1]) * (y[i] + y[i - 1]) / 2.0
    return float(area)


def roc_curve(y_true: Sequence[int], scores: Sequence[float]) -> RocCurve:
    """ROC points for the rule ``score > threshold``.

    Thresholds run from a sentinel above the top score down through every
    distinct score; a closing (1, 1) point uses a sentinel below the minimum.
    Consecutive thresholds that give the same point are merged.
    """
    t = _binary_vector(y_true, "y_true")
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != t.shape:
        raise ImbalForestError("y_true and scores differ in length")
    if not np.all(np.isfinite(s)):
        raise ImbalForestError("scores must be finite")
    n_pos = int(t.sum())
    n_neg = len(t) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ImbalForestError("roc_curve needs both classes in y_true")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    t_sorted = t[order]
    distinct = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), len(s) - 1]
    tp_cum = np.cumsum(t_sorted)[distinct]
    fp_cum = (distinct + 1) - tp_cum
    # classifying "> s_k" keeps everything strictly above s_k: counts at the previous group
    tps = np.r_[0, tp_cum[:-1]]
    fps = np.r_[0, fp_cum[:-1]]
    thr = s_sorted[distinct]

    thresholds = [float(s_sorted[0]) + 1.0]
    fpr = [0.0]
    tpr = [0.0]
    for k in range(len(thr)):
        point = (fps[k] / n_neg, tps[k] / n_pos)
        if point != (fpr[-1], tpr[-1]):
            thresholds.append(float(thr[k]))
            fpr.append(point[0])
            tpr.append(point[1])
    if (fpr[-1], tpr[-1]) != (1.0, 1.0):
        thresholds.append(float(s_sorted[-1]) - 1.0)
        fpr.append(1.0)
        tpr.append(1.0)
    fa, ta = np.array(fpr), np.array(tpr)
    return RocCurve(fa, ta, np.array(thresholds), auc(fa, ta))
