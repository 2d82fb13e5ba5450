"""Evaluation metrics: ARI, confusion matrix, ROC/PR curves, precision/recall/F1."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import LabelError, ShapeError, UndefinedClassError

REPORT_SCHEMA_VERSION = 1


def _pairs(n):
    return n * (n - 1) // 2


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Hubert-Arabie adjusted Rand index, computed in exact integer arithmetic.

    Returns 1.0 for the degenerate 0/0 case when the partitions are
    identical, 0.0 otherwise.
    """
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError("label vectors must be 1-D and of equal length")
    if a.size < 2:
        raise ShapeError("ARI needs at least 2 records")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    index = sum(_pairs(int(v)) for v in table.ravel())
    sa = sum(_pairs(int(v)) for v in table.sum(axis=1))
    sb = sum(_pairs(int(v)) for v in table.sum(axis=0))
    total = _pairs(a.size)
    num = index * total - sa * sb
    den = Fraction(sa + sb, 2) * total - sa * sb
    if den == 0:
        same = np.array_equal(ia, ib) or (sa == sb == index)
        return 1.0 if num == 0 and same else 0.0
    return float(Fraction(num) / den)


def confusion_matrix(true_labels, predicted_labels, n_classes: int) -> np.ndarray:
    t = np.asarray(true_labels)
    p = np.asarray(predicted_labels)
    if t.shape != p.shape:
        raise ShapeError("label vectors must have equal length")
    for v in (t, p):
        if v.size and (not np.issubdtype(v.dtype, np.integer) or v.min() < 0
                       or v.max() >= n_classes):
            raise LabelError(f"labels must be integers in [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


def _binary(true_labels, scores, k):
    t = np.asarray(true_labels)
    P = np.asarray(scores, dtype=float)
    s = P[:, k] if P.ndim == 2 else P
    if s.shape != t.shape:
        raise ShapeError("one score per record required")
    pos = t == k
    if not pos.any():
        raise UndefinedClassError(f"class {k} has no positive records")
    return pos, s


def _sweep(pos, s):
    """Cumulative TP/FP counts at each distinct threshold, descending."""
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    hits = pos[order]
    tp = np.cumsum(hits)
    fp = np.cumsum(~hits)
    last = np.r_[np.flatnonzero(np.diff(s_sorted)), s_sorted.size - 1]
    return s_sorted[last], tp[last], fp[last]


def roc_curve(true_labels, scores, k: int):
    """One-vs-rest ROC points ``(thresholds, fpr, tpr)``.

    A record counts as positive when its score is >= the threshold. The
    sweep starts at +inf (nothing positive) and ends at -inf (everything).
    """
    pos, s = _binary(true_labels, scores, k)
    thr, tp, fp = _sweep(pos, s)
    n_pos, n_neg = pos.sum(), (~pos).sum()
    thr = np.r_[np.inf, thr, -np.inf]
    tp = np.r_[0, tp, n_pos]
    fp = np.r_[0, fp, n_neg]
    tpr = tp / n_pos
    fpr = fp / n_neg if n_neg else np.zeros_like(tpr, dtype=float)
    return thr, fpr, tpr


def roc_auc(true_labels, scores, k: int):
    """Area under the one-vs-rest ROC by the trapezoid rule, plus the curve."""
    thr, fpr, tpr = roc_curve(true_labels, scores, k)
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return auc, (thr, fpr, tpr)


def pr_curve(true_labels, scores, k: int):
    """One-vs-rest precision/recall ladder and step-wise average precision.

    Returns ``(average_precision, (thresholds, recall, precision))``.
    Precision with zero predicted positives is defined as 1.
    """
    pos, s = _binary(true_labels, scores, k)
    thr, tp, fp = _sweep(pos, s)
    n_pos = pos.sum()
    recall = np.r_[0.0, tp / n_pos]
    precision = np.r_[1.0, tp / (tp + fp)]
    thr = np.r_[np.inf, thr]
    ap = float(np.sum(np.diff(recall) * precision[1:]))
    return ap, (thr, recall, precision)


def precision_recall_f1(confusion) -> dict:
    cm = np.asarray(confusion, dtype=float)
    diag = np.diag(cm)
    col = cm.sum(axis=0)
    row = cm.sum(axis=1)
    precision = np.divide(diag, col, out=np.zeros_like(diag), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros_like(diag), where=row > 0)
    s = precision + recall
    f1 = np.divide(2 * precision * recall, s, out=np.zeros_like(diag), where=s > 0)
    n = cm.sum()
    return {
        "precision": precision, "recall": recall, "f1": f1,
        "macro_precision": float(precision.mean()),
        "macro_recall": float(recall.mean()),
        "macro_f1": float(f1.mean()),
        "accuracy": float(np.trace(cm) / n) if n else 0.0,
    }


@dataclass
class EvaluationReport:
    classes: tuple[str, ...]
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    auc: np.ndarray
    macro_auc: float
    average_precision: np.ndarray
    roc: dict = field(default_factory=dict)
    pr: dict = field(default_factory=dict)
    ari: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def per_class(v):
            return {c: float(x) for c, x in zip(self.classes, v)}
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "classes": list(self.classes),
            "confusion_matrix": self.confusion.tolist(),
            "accuracy": self.accuracy,
            "precision": per_class(self.precision),
            "recall": per_class(self.recall),
            "f1": per_class(self.f1),
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "auc": per_class(self.auc),
            "macro_auc": self.macro_auc,
            "average_precision": per_class(self.average_precision),
            "ari": self.ari,
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write_curves(self, directory) -> list:
        """Write roc_<class>.csv and pr_<class>.csv (threshold, x, y); returns the paths."""
        from pathlib import Path
        out = []
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for kind, curves, cols in (("roc", self.roc, ("threshold", "fpr", "tpr")),
                                   ("pr", self.pr, ("threshold", "recall", "precision"))):
            for c in self.classes:
                if c not in curves:
                    continue
                path = d / f"{kind}_{c}.csv"
                with open(path, "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(cols)
                    for row in zip(*curves[c]):
                        w.writerow([repr(float(v)) for v in row])
                out.append(path)
        return out


def evaluate(true_codes, proba, classes, cluster_labels=None) -> EvaluationReport:
    """Full report for integer true codes and an (n, K) probability matrix.

    Predictions are the argmax of ``proba`` (ties to the lowest index).
    Classes absent from the test labels get nan AUC/AP and are left out of
    the macro AUC.
    """
    t = np.asarray(true_codes)
    P = np.asarray(proba, dtype=float)
    K = len(classes)
    if P.shape != (t.size, K):
        raise ShapeError(f"probability matrix must be ({t.size}, {K})")
    pred = np.argmax(P, axis=1)
    cm = confusion_matrix(t, pred, K)
    prf = precision_recall_f1(cm)
    auc = np.full(K, np.nan)
    ap = np.full(K, np.nan)
    roc, pr = {}, {}
    for k, c in enumerate(classes):
        if not np.any(t == k):
            continue
        auc[k], roc[c] = roc_auc(t, P, k)
        ap[k], pr[c] = pr_curve(t, P, k)
    present = ~np.isnan(auc)
    ari = None if cluster_labels is None else adjusted_rand_index(t, cluster_labels)
    return EvaluationReport(
        classes=tuple(classes), confusion=cm,
        precision=prf["precision"], recall=prf["recall"], f1=prf["f1"],
        accuracy=prf["accuracy"], macro_precision=prf["macro_precision"],
        macro_recall=prf["macro_recall"], macro_f1=prf["macro_f1"],
        auc=auc, macro_auc=float(auc[present].mean()) if present.any() else float("nan"),
        average_precision=ap, roc=roc, pr=pr, ari=ari,
    )
