from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist


@dataclass(frozen=True, eq=False)
class ClusterModel:
    k: int
    centroids: np.ndarray       # (k, d)
    assignment: np.ndarray      # (M,) in [0, k)
    objective: float            # within-cluster SSE, or log-likelihood for GMM
    history: list = field(default_factory=list)
    variances: np.ndarray = None   # (k, d) diagonal covariances, mixtures only
    weights: np.ndarray = None     # (k,) mixing proportions, mixtures only

    def members(self, c):
        return np.flatnonzero(self.assignment == c)

    def sizes(self):
        return np.bincount(self.assignment, minlength=self.k)


def check_points(points):
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or len(X) < 1:
        raise ValueError(f'points must be a non-empty (M, d) matrix, got shape {X.shape}')
    bad = np.flatnonzero(~np.isfinite(X).all(axis=1))
    if len(bad):
        raise ValueError(f'point {bad[0]} is not finite')
    return X


def check_k(k, M):
    if k < 1:
        raise ValueError(f'k must be >= 1, got {k}')
    return min(int(k), M)


def assign(X, C):
    """Nearest centroid (ties to the lower index) and the squared distance to it."""
    dists = cdist(X, C, 'sqeuclidean')
    labels = np.argmin(dists, axis=1)
    return labels, dists[np.arange(len(X)), labels]


def repair_empty(X, C, labels, dists):
    """Move the point farthest from its centroid into each empty cluster."""
    k = len(C)
    C, labels, dists = C.copy(), labels.copy(), dists.copy()
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        movable = counts[labels] > 1
        if not movable.any():
            break
        i = int(np.argmax(np.where(movable, dists, -np.inf)))
        counts[labels[i]] -= 1
        counts[j] += 1
        labels[i] = j
        dists[i] = 0.0
        C[j] = X[i]
    return C, labels, dists


def cluster_means(X, labels, C):
    k = len(C)
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros_like(C)
    np.add.at(sums, labels, X)
    means = C.copy()
    nonempty = counts > 0
    means[nonempty] = sums[nonempty] / counts[nonempty, None]
    return means
