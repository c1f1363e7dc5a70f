"""
Random Forest
Bootstrap-aggregated CART trees with Gini splits and mean-decrease-in-impurity
feature importance.
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from utils.concurrency import run_concurrently
from utils.errors import DegenerateLabelError
from .data import DataLike, as_dataset

N_CLASSES = 2
TIE_EPS = 1e-12


@dataclass
class Tree:
    """Flat node arrays; a node with feature -1 is a leaf."""
    feature: List[int] = field(default_factory=list)
    threshold: List[float] = field(default_factory=list)
    left: List[int] = field(default_factory=list)
    right: List[int] = field(default_factory=list)
    value: List[np.ndarray] = field(default_factory=list)  # class counts

    def add_node(self, counts: np.ndarray) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(counts)
        return len(self.feature) - 1

    @property
    def n_splits(self) -> int:
        return sum(1 for f in self.feature if f >= 0)

    def leaf_counts(self, x: np.ndarray) -> np.ndarray:
        node = 0
        while self.feature[node] >= 0:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
        return self.value[node]

    def predict(self, X: np.ndarray) -> np.ndarray:
        # argmax takes the lower class on ties
        return np.array([int(np.argmax(self.leaf_counts(x))) for x in X], dtype=np.int64)


@dataclass
class ForestModel:
    trees: List[Tree]
    importance: np.ndarray
    n_features: int

    @property
    def n_splits(self) -> int:
        return sum(t.n_splits for t in self.trees)

    def votes(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        votes = np.zeros((X.shape[0], N_CLASSES), dtype=np.int64)
        for tree in self.trees:
            votes[np.arange(X.shape[0]), tree.predict(X)] += 1
        return votes

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Majority vote; a tied vote goes to low."""
        return np.argmax(self.votes(X), axis=1).astype(np.int64)


def _class_counts(y: np.ndarray) -> np.ndarray:
    return np.bincount(y, minlength=N_CLASSES).astype(np.float64)


def best_split(X: np.ndarray, y: np.ndarray, features: List[int]):
    """
    Highest Gini decrease over midpoints of sorted unique values, features in
    the given order; the first best feature wins, then the lowest threshold.
    Returns (feature, threshold, decrease) or None when nothing splits.
    """
    n = y.size
    total = _class_counts(y)
    parent_term = np.sum(total ** 2) / n
    best = None
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        onehot = np.eye(N_CLASSES)[y[order]]
        left = np.cumsum(onehot, axis=0)[:-1]
        boundary = np.flatnonzero(xs[:-1] < xs[1:])
        if boundary.size == 0:
            continue
        left = left[boundary]
        right = total - left
        n_left = boundary + 1.0
        n_right = n - n_left
        decrease = np.sum(left ** 2, axis=1) / n_left + np.sum(right ** 2, axis=1) / n_right - parent_term
        i = int(np.argmax(decrease))
        if best is None or decrease[i] > best[2] + TIE_EPS:
            b = boundary[i]
            best = (int(f), float((xs[b] + xs[b + 1]) / 2.0), float(decrease[i]))
    return best


def grow_tree(X: np.ndarray, y: np.ndarray, mtry: int, rng: np.random.Generator, importance: np.ndarray) -> Tree:
    """CART grown until nodes are pure or hold fewer than 2 samples; adds weighted decreases to ``importance``."""
    tree = Tree()
    n_root = y.size
    root = tree.add_node(_class_counts(y))
    stack = [(root, np.arange(y.size))]
    while stack:
        node, idx = stack.pop()
        ys = y[idx]
        if idx.size < 2 or np.all(ys == ys[0]):
            continue
        Xn = X[idx]
        varying = [f for f in rng.permutation(X.shape[1]) if Xn[:, f].min() < Xn[:, f].max()]
        candidates = sorted(int(f) for f in varying[:mtry])
        split = best_split(Xn, ys, candidates)
        if split is None:
            continue
        f, thr, decrease = split
        importance[f] += decrease / n_root
        goes_left = Xn[:, f] <= thr
        left = tree.add_node(_class_counts(ys[goes_left]))
        right = tree.add_node(_class_counts(ys[~goes_left]))
        tree.feature[node], tree.threshold[node] = f, thr
        tree.left[node], tree.right[node] = left, right
        stack.append((right, idx[~goes_left]))
        stack.append((left, idx[goes_left]))
    return tree


def fit_forest(
    data: DataLike,
    n_trees: int = 100,
    mtry: Optional[int] = None,
    seed: int = 0,
    workers: int = 1,
) -> ForestModel:
    """Bootstrap forest on low/high labels; one seed stream per tree spawned from ``seed``."""
    dataset = as_dataset(data)
    return fit_forest_arrays(dataset.X, dataset.labels, n_trees, mtry, seed, workers)


def fit_forest_arrays(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int = 100,
    mtry: Optional[int] = None,
    seed: int = 0,
    workers: int = 1,
) -> ForestModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if y.size < 2 or np.unique(y).size < 2:
        raise DegenerateLabelError("random forest needs at least two samples covering both classes")
    k = X.shape[1]
    mtry = mtry or math.ceil(math.sqrt(k))

    def build(child: np.random.SeedSequence):
        rng = np.random.default_rng(child)
        sample = rng.integers(0, y.size, y.size)
        importance = np.zeros(k)
        return grow_tree(X[sample], y[sample], mtry, rng, importance), importance

    built = run_concurrently(build, np.random.SeedSequence(seed).spawn(n_trees), workers)
    importance = np.sum([imp for _, imp in built], axis=0)
    if importance.sum() > 0:
        importance = importance / importance.sum()
    return ForestModel([t for t, _ in built], importance, k)
