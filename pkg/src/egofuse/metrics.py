"""Confusion matrices and classification scores.

Scores reported per evaluation: accuracy, macro precision/recall/F1,
Cohen's kappa, and a diagonal-concentration score that penalizes the
squared shortfall of per-class row percentages from 100.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    kappa: float
    sic: float
    per_class_precision: np.ndarray
    per_class_recall: np.ndarray
    per_class_f1: np.ndarray

    def as_row(self) -> dict[str, float]:
        return {
            "A": self.accuracy,
            "P": self.precision,
            "R": self.recall,
            "kappa": self.kappa,
            "SIC": self.sic,
            "F": self.f1,
        }


def confusion(truth, pred, n_classes: int) -> np.ndarray:
    """Counts[t][p]: rows are ground truth, columns are predictions."""
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.ndim != 1 or truth.shape != pred.shape:
        raise MetricsError(
            f"label vectors must be 1-D and equal length, got {truth.shape} vs {pred.shape}"
        )
    if truth.size == 0:
        raise MetricsError("need at least one labelled sample")
    for name, arr in (("truth", truth), ("prediction", pred)):
        if arr.min() < 0 or arr.max() >= n_classes:
            raise MetricsError(f"{name} labels outside [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (truth, pred), 1)
    return cm


def _check_cm(cm) -> np.ndarray:
    cm = np.asarray(cm, dtype=np.float64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise MetricsError(f"confusion matrix must be square, got {cm.shape}")
    if cm.sum() <= 0:
        raise MetricsError("empty confusion matrix")
    if np.any(cm < 0):
        raise MetricsError("negative counts")
    return cm


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def prf(cm) -> tuple[float, float, float, float, np.ndarray, np.ndarray, np.ndarray]:
    """(accuracy, macro P, macro R, macro F1, per-class P/R/F1).

    Per class: P = TP/(TP+FP), R = TP/(TP+FN); 0/0 counts as 0 so
    absent classes drag the macro average down instead of poisoning it.
    """
    cm = _check_cm(cm)
    tp = np.diag(cm)
    col = cm.sum(axis=0)
    row = cm.sum(axis=1)
    p = _safe_div(tp, col)
    r = _safe_div(tp, row)
    f = _safe_div(2.0 * p * r, p + r)
    accuracy = float(tp.sum() / cm.sum())
    return accuracy, float(p.mean()), float(r.mean()), float(f.mean()), p, r, f


def kappa(cm) -> float:
    """Chance-corrected agreement (p0 - pe) / (1 - pe)."""
    cm = _check_cm(cm)
    total = cm.sum()
    p0 = float(np.diag(cm).sum() / total)
    row = cm.sum(axis=1) / total
    col = cm.sum(axis=0) / total
    pe = float(row @ col)
    if pe >= 1.0:
        return 1.0 if p0 >= 1.0 else 0.0
    return (p0 - pe) / (1.0 - pe)


def sic(cm) -> float:
    """1 - mean squared shortfall of row-diagonal percentages from 100."""
    cm = _check_cm(cm)
    row = cm.sum(axis=1)
    if np.any(row <= 0):
        raise MetricsError("every true class needs at least one sample")
    v = 100.0 * np.diag(cm) / row
    C = cm.shape[0]
    return float(1.0 - np.sum((v - 100.0) ** 2) / (C * 100.0**2))


def compute_report(truth, pred, n_classes: int) -> MetricsReport:
    cm = confusion(truth, pred, n_classes)
    accuracy, P, R, F, pc_p, pc_r, pc_f = prf(cm)
    return MetricsReport(
        accuracy=accuracy,
        precision=P,
        recall=R,
        f1=F,
        kappa=kappa(cm),
        sic=sic(cm),
        per_class_precision=pc_p,
        per_class_recall=pc_r,
        per_class_f1=pc_f,
    )


def render_confusion(cm, class_names: list[str] | None = None) -> str:
    """Row-percentage table, one line per true class."""
    cm = _check_cm(cm)
    C = cm.shape[0]
    names = list(class_names) if class_names is not None else [str(i) for i in range(C)]
    if len(names) != C:
        raise MetricsError(f"need {C} class names, got {len(names)}")
    width = max(max(len(n) for n in names), 6)
    header = " " * (width + 2) + " ".join(f"{n:>{width}}" for n in names)
    lines = [header]
    for i in range(C):
        row = cm[i].sum()
        pcts = 100.0 * cm[i] / row if row > 0 else np.zeros(C)
        cells = " ".join(f"{v:>{width}.1f}" for v in pcts)
        lines.append(f"{names[i]:>{width}}  {cells}")
    return "\n".join(lines) + "\n"
