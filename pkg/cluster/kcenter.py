import numpy as np
from scipy.spatial.distance import cdist

from cluster.common import ClusterModel, assign, check_k, check_points


def kcenter_greedy(points, budget, seed_centers=()):
    """Farthest-first traversal.

    Repeatedly picks the point with the largest Euclidean distance to its nearest
    chosen center; seed_centers count as chosen. With no seeds the first pick is
    index 0. Ties go to the lower index.
    """
    X = check_points(points)
    M = len(X)
    seeds = np.unique(np.asarray(seed_centers, dtype=np.int64).reshape(-1))
    if len(seeds) and (seeds[0] < 0 or seeds[-1] >= M):
        raise ValueError(f'seed centers must lie in [0, {M})')
    if budget < 1:
        raise ValueError(f'budget must be >= 1, got {budget}')
    if budget > M - len(seeds):
        raise ValueError(f'budget {budget} exceeds the {M - len(seeds)} unchosen points')

    chosen = np.zeros(M, dtype=bool)
    min_dist = np.full(M, np.inf)
    if len(seeds):
        chosen[seeds] = True
        min_dist = cdist(X, X[seeds]).min(axis=1)

    selected = []
    for _ in range(budget):
        ind = int(np.argmax(np.where(chosen, -np.inf, min_dist)))
        selected.append(ind)
        chosen[ind] = True
        min_dist = np.minimum(min_dist, cdist(X, X[ind:ind + 1]).ravel())
    return selected


def covering_radius(points, centers):
    X = check_points(points)
    return float(cdist(X, X[np.asarray(centers, dtype=np.int64)]).min(axis=1).max())


def kcenter_partition(points, k, seed=0):
    """k-center as a partitioner: greedy centers, then nearest-center assignment.

    Deterministic; seed is accepted for a uniform clustering signature.
    """
    X = check_points(points)
    k = check_k(k, len(X))
    centers = kcenter_greedy(X, k)
    C = X[centers].copy()
    labels, dists = assign(X, C)
    objective = float(dists.sum())
    return ClusterModel(k=k, centroids=C, assignment=labels, objective=objective, history=[objective])
