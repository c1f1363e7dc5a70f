"""
Lloyd's K-Means
k-means++ seeding, nearest-centroid assignment and mean updates with
empty-cluster repair. Costs are squared Euclidean sums in float64.
"""
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from config.settings import settings
from config.logger_config import setup_logger
from utils.errors import DegenerateDataError, InvalidShapeError

logger = setup_logger("KMeans", settings.log_level)

ASSIGN_CHUNK = 8192


@dataclass
class KMeansResult:
    centroids: np.ndarray
    assignments: np.ndarray
    cost: float
    history: List[float] = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False


def _as_points(points: np.ndarray) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise InvalidShapeError(f"points must be N×D, got shape {x.shape}")
    return x


def squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """N×K matrix of ‖x_i − m_k‖², summed term by term."""
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid; ties go to the lowest index."""
    x = _as_points(points)
    m = _as_points(centroids)
    if x.shape[1] != m.shape[1]:
        raise InvalidShapeError(f"points have dimension {x.shape[1]}, centroids {m.shape[1]}")
    labels = np.empty(x.shape[0], dtype=np.int64)
    for start in range(0, x.shape[0], ASSIGN_CHUNK):
        labels[start:start + ASSIGN_CHUNK] = squared_distances(x[start:start + ASSIGN_CHUNK], m).argmin(axis=1)
    return labels


def sse(points: np.ndarray, centroids: np.ndarray, assignments: np.ndarray) -> float:
    x = _as_points(points)
    diff = x - _as_points(centroids)[assignments]
    return float(np.einsum("nd,nd->", diff, diff))


def kmeans_pp_seed(points: np.ndarray, k: int, seed: int) -> np.ndarray:
    """D² sampling: each next centroid is drawn with probability ∝ squared distance to the chosen set."""
    x = _as_points(points)
    distinct = np.unique(x, axis=0).shape[0]
    if distinct < k:
        raise DegenerateDataError(f"{distinct} distinct points cannot seed {k} clusters")

    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(x.shape[0]))]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    while len(chosen) < k:
        nxt = int(rng.choice(x.shape[0], p=d2 / d2.sum()))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((x - x[nxt]) ** 2, axis=1))
    return x[chosen].copy()


def update_centroids(points: np.ndarray, assignments: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Mean of each cluster. An empty cluster takes the point farthest from its
    own centroid among clusters that can spare one; repairs repeat until no
    cluster is empty. Returns (centroids, possibly repaired assignments).
    """
    x = _as_points(points)
    if x.shape[0] < k:
        raise DegenerateDataError(f"{x.shape[0]} points cannot fill {k} clusters")
    labels = np.asarray(assignments, dtype=np.int64).copy()

    while True:
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros((k, x.shape[1]))
        np.add.at(sums, labels, x)
        centroids = sums / np.maximum(counts, 1)[:, None]
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return centroids, labels
        dist = np.sum((x - centroids[labels]) ** 2, axis=1)
        dist[counts[labels] < 2] = -1.0
        donor = int(np.argmax(dist))
        logger.debug(f"⚠️ Cluster {int(empty[0])} empty; reassigning point {donor} from cluster {int(labels[donor])}")
        labels[donor] = int(empty[0])


def lloyd(points: np.ndarray, init: np.ndarray, max_iter: int = 300, tol: float = 1e-6) -> KMeansResult:
    """
    Alternate mean updates and assignments until the assignment is a fixpoint,
    the relative cost drop falls below ``tol``, or ``max_iter`` is reached.
    ``history[0]`` is the cost of the initial assignment; one entry per iteration follows.
    """
    x = _as_points(points)
    centroids = _as_points(init).copy()
    k = centroids.shape[0]
    labels = assign(x, centroids)
    history = [sse(x, centroids, labels)]
    converged = False
    n_iter = 0

    for n_iter in range(1, max_iter + 1):
        centroids, labels = update_centroids(x, labels, k)
        new_labels = assign(x, centroids)
        cost = sse(x, centroids, new_labels)
        previous = history[-1]
        history.append(cost)
        stable = np.array_equal(new_labels, labels)
        labels = new_labels
        if stable or cost == 0.0 or (previous - cost) < tol * previous:
            converged = True
            break

    return KMeansResult(centroids, labels, history[-1], history, n_iter, converged)


def fit_kmeans(points: np.ndarray, k: int, seed: int, max_iter: int = 300, tol: float = 1e-6) -> KMeansResult:
    """k-means++ seeding followed by Lloyd iterations."""
    return lloyd(points, kmeans_pp_seed(points, k, seed), max_iter, tol)
