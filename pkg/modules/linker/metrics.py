"""
Confusion-based classification metrics (positive class = high).
"""
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np
from sklearn.metrics import confusion_matrix

from utils.errors import InputError

METRIC_KEYS = ("accuracy", "sensitivity", "specificity", "f1")


@dataclass
class ConfusionMetrics:
    accuracy: float
    sensitivity: float
    specificity: float
    f1: float
    tp: int
    fn: int
    tn: int
    fp: int
    # metrics whose denominator was zero and were reported as 0
    zero_division: List[str] = field(default_factory=list)

    def as_dict(self) -> Dict[str, float]:
        return {key: getattr(self, key) for key in METRIC_KEYS}


def _ratio(numerator: float, denominator: float, name: str, flags: List[str]) -> float:
    if denominator == 0:
        flags.append(name)
        return 0.0
    return numerator / denominator


def confusion_metrics(predictions: Sequence[int], truths: Sequence[int]) -> ConfusionMetrics:
    predictions = np.asarray(predictions, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if predictions.shape != truths.shape:
        raise InputError(f"{predictions.size} predictions for {truths.size} truths")
    if predictions.size == 0:
        raise InputError("no predictions to score")
    if not (np.isin(predictions, (0, 1)).all() and np.isin(truths, (0, 1)).all()):
        raise InputError("labels must be 0 (low) or 1 (high)")

    (tn, fp), (fn, tp) = confusion_matrix(truths, predictions, labels=[0, 1])
    flags: List[str] = []
    sensitivity = _ratio(tp, tp + fn, "sensitivity", flags)
    specificity = _ratio(tn, tn + fp, "specificity", flags)
    precision = _ratio(tp, tp + fp, "precision", flags)
    f1 = _ratio(2 * precision * sensitivity, precision + sensitivity, "f1", flags)
    accuracy = (tp + tn) / predictions.size
    return ConfusionMetrics(
        float(accuracy), float(sensitivity), float(specificity), float(f1),
        int(tp), int(fn), int(tn), int(fp), flags,
    )
