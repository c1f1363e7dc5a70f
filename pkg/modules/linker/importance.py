"""
Feature-importance stability across cross-validation folds.
"""
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from utils.errors import InputError


@dataclass
class ImportanceTable:
    mean: np.ndarray
    sd: np.ndarray
    top_freq: np.ndarray   # share of folds ranking the cluster in the top ``top_n``
    top1_freq: np.ndarray
    top_n: int
    n_folds: int
    modal_pair: Optional[Tuple[int, int]]  # zero-based, ascending
    modal_pair_freq: float
    per_fold: np.ndarray

    @property
    def k(self) -> int:
        return int(self.mean.size)

    def ranking(self) -> np.ndarray:
        """Clusters by decreasing mean importance; ties to the lower index."""
        return np.argsort(-self.mean, kind="stable")


def fold_ranks(importances: np.ndarray) -> np.ndarray:
    """Per fold, clusters ordered by decreasing importance (stable)."""
    return np.argsort(-importances, axis=1, kind="stable")


def importance_stability(per_fold: np.ndarray, top_n: int = 4) -> ImportanceTable:
    per_fold = np.atleast_2d(np.asarray(per_fold, dtype=np.float64))
    n_folds, k = per_fold.shape
    if n_folds == 0:
        raise InputError("no fold importances")
    top_n = min(top_n, k)

    ranks = fold_ranks(per_fold)
    top = np.zeros(k)
    top1 = np.zeros(k)
    pairs: Counter = Counter()
    for order in ranks:
        top[order[:top_n]] += 1
        top1[order[0]] += 1
        if k >= 2:
            pairs[tuple(sorted(int(c) for c in order[:2]))] += 1

    modal_pair, modal_freq = None, 0.0
    if pairs:
        # most frequent pair; ties go to the lexicographically smallest
        modal_pair, count = min(pairs.items(), key=lambda item: (-item[1], item[0]))
        modal_freq = count / n_folds

    sd = per_fold.std(axis=0, ddof=1) if n_folds >= 2 else np.zeros(k)
    return ImportanceTable(
        per_fold.mean(axis=0), sd, top / n_folds, top1 / n_folds, top_n, n_folds,
        modal_pair, modal_freq, per_fold,
    )
