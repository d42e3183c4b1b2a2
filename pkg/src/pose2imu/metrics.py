from __future__ import annotations

import numpy as np


def confusion_matrix(true, pred, n_classes: int | None = None) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    true = np.asarray(true, dtype=int)
    pred = np.asarray(pred, dtype=int)
    if n_classes is None:
        n_classes = int(max(true.max(initial=-1), pred.max(initial=-1))) + 1
    cm = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(cm, (true, pred), 1)
    return cm


def f1_from_confusion(cm: np.ndarray) -> np.ndarray:
    tp = np.diag(cm).astype(float)
    pred_pos = cm.sum(axis=0)
    true_pos = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(pred_pos > 0, tp / pred_pos, 0.0)
        r = np.where(true_pos > 0, tp / true_pos, 0.0)
        f1 = np.where(p + r > 0, 2 * p * r / (p + r), 0.0)
    return f1


def mean_f1(pred, true, n_classes: int | None = None):
    """Macro F1 over classes present in the ground truth, plus per-class F1.

    Per-class F1 is 2PR / (P + R), or 0 when P + R = 0. Returns
    ``(macro, per_class)`` where per_class maps class id -> F1 for every class
    seen in either the truth or the predictions.
    """
    pred = np.asarray(pred, dtype=int)
    true = np.asarray(true, dtype=int)
    if pred.shape != true.shape:
        raise ValueError("prediction and truth lengths differ")
    if true.size == 0:
        raise ValueError("empty input")
    cm = confusion_matrix(true, pred, n_classes)
    f1 = f1_from_confusion(cm)
    in_truth = np.unique(true)
    seen = np.union1d(in_truth, np.unique(pred))
    return float(np.mean(f1[in_truth])), {int(c): float(f1[c]) for c in seen}


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=float) - np.mean(a)
    b = np.asarray(b, dtype=float) - np.mean(b)
    den = np.sqrt(np.sum(a * a) * np.sum(b * b))
    return float(np.sum(a * b) / den) if den > 0 else float("nan")
