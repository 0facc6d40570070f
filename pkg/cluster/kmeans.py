"""Lloyd k-means with k-means++ (or uniform) seeding, and Sculley mini-batch k-means."""
import logging

import numpy as np
from scipy.spatial.distance import cdist

from cluster.common import ClusterModel, assign, check_k, check_points, cluster_means, repair_empty

logger = logging.getLogger(__name__)


def kmeans_plusplus(X, k, rng):
    """D^2-weighted sequential seeding; returns k distinct row indices.

    The first index is uniform. When every remaining point coincides with a chosen
    one (all D^2 zero) the next index is uniform over the unchosen points.
    """
    M = len(X)
    assert 1 <= k <= M, f'cannot seed {k} centers from {M} points'
    chosen = np.zeros(M, dtype=bool)
    first = int(rng.integers(M))
    indices = [first]
    chosen[first] = True
    d2 = cdist(X, X[first:first + 1], 'sqeuclidean').ravel()
    for _ in range(1, k):
        weights = np.where(chosen, 0.0, d2)
        total = weights.sum()
        if total > 0:
            nxt = int(rng.choice(M, p=weights / total))
        else:
            nxt = int(rng.choice(np.flatnonzero(~chosen)))
        indices.append(nxt)
        chosen[nxt] = True
        d2 = np.minimum(d2, cdist(X, X[nxt:nxt + 1], 'sqeuclidean').ravel())
    return np.array(indices, dtype=np.int64)


def kmeans(points, k, seed=0, max_iter=300, tol=1e-4, init='k-means++'):
    X = check_points(points)
    k = check_k(k, len(X))
    if max_iter < 1:
        raise ValueError(f'max_iter must be >= 1, got {max_iter}')
    rng = np.random.default_rng(seed)
    if init == 'k-means++':
        seeds = kmeans_plusplus(X, k, rng)
    elif init == 'random':
        seeds = rng.choice(len(X), size=k, replace=False)
    else:
        raise ValueError(f'unknown init {init!r}')
    C = X[seeds].copy()

    history = []
    for it in range(max_iter):
        labels, dists = assign(X, C)
        C, labels, dists = repair_empty(X, C, labels, dists)
        history.append(float(dists.sum()))
        new_C = cluster_means(X, labels, C)
        shift = np.sqrt(((new_C - C) ** 2).sum(axis=1)).max()
        C = new_C
        if shift < tol:
            break

    labels, dists = assign(X, C)
    C, labels, dists = repair_empty(X, C, labels, dists)
    objective = float(dists.sum())
    history.append(objective)
    logger.debug('kmeans k=%d converged after %d iterations, objective %.4f', k, it + 1, objective)
    return ClusterModel(k=k, centroids=C, assignment=labels, objective=objective, history=history)


def minibatch_kmeans(points, k, seed=0, batch=256, max_iter=100, tol=0.0):
    """Per-centroid counts act as step sizes: each centroid is the running mean of
    every point it has absorbed (its seed point counts once)."""
    X = check_points(points)
    M = len(X)
    k = check_k(k, M)
    if batch < 1:
        raise ValueError(f'batch must be >= 1, got {batch}')
    if max_iter < 1:
        raise ValueError(f'max_iter must be >= 1, got {max_iter}')
    batch = min(int(batch), M)
    rng = np.random.default_rng(seed)
    C = X[kmeans_plusplus(X, k, rng)].copy()
    counts = np.ones(k)

    for it in range(max_iter):
        idx = np.arange(M) if batch == M else np.sort(rng.choice(M, size=batch, replace=False))
        Xb = X[idx]
        labels, _ = assign(Xb, C)
        n = np.bincount(labels, minlength=k).astype(np.float64)
        sums = np.zeros_like(C)
        np.add.at(sums, labels, Xb)
        hit = n > 0
        new_C = C.copy()
        new_C[hit] = (counts[hit, None] * C[hit] + sums[hit]) / (counts[hit] + n[hit])[:, None]
        counts += n
        shift = np.sqrt(((new_C - C) ** 2).sum(axis=1)).max()
        C = new_C
        if shift <= tol:
            break

    labels, dists = assign(X, C)
    C, labels, dists = repair_empty(X, C, labels, dists)
    objective = float(dists.sum())
    return ClusterModel(k=k, centroids=C, assignment=labels, objective=objective, history=[objective])
