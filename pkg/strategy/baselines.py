import logging

import numpy as np
from sklearn.neighbors import NearestNeighbors

from cluster.kcenter import kcenter_greedy
from cluster.kmeans import kmeans, kmeans_plusplus
from model.linear_head import predict
from ood.scores import gradient_embeddings
from strategy.query import QueryBatch, batch_size, round_robin

logger = logging.getLogger(__name__)


def random_select(state, B, seed=0):
    n = batch_size(state, B)
    rng = np.random.default_rng(seed)
    return QueryBatch(ids=rng.choice(np.asarray(state.unlabeled_ids, dtype=np.int64), size=n, replace=False))


def raw_margin(head, X):
    probs = np.sort(predict(head, X).probs, axis=-1)
    second = probs[:, -2] if probs.shape[1] > 1 else 0.0
    return probs[:, -1] - second


def margin_select(pool, state, head, B):
    """Smallest top-two probability gap first, ties to the lower id."""
    n = batch_size(state, B)
    ids = np.asarray(state.unlabeled_ids, dtype=np.int64)
    margin = raw_margin(head, pool.embeddings[ids])
    return QueryBatch(ids=ids[np.lexsort((ids, margin))[:n]])


def coreset_select(pool, state, B):
    n = batch_size(state, B)
    labeled = np.asarray(state.labeled_ids, dtype=np.int64)
    unlabeled = np.asarray(state.unlabeled_ids, dtype=np.int64)
    points = np.concatenate([pool.embeddings[labeled], pool.embeddings[unlabeled]])
    picks = np.asarray(kcenter_greedy(points, n, seed_centers=np.arange(len(labeled))), dtype=np.int64)
    return QueryBatch(ids=unlabeled[picks - len(labeled)])


def badge_select(pool, state, head, B, seed=0):
    """k-means++ seeding over hypothetical-label gradient embeddings."""
    n = batch_size(state, B)
    ids = np.asarray(state.unlabeled_ids, dtype=np.int64)
    G = gradient_embeddings(head, pool.embeddings[ids])
    return QueryBatch(ids=ids[kmeans_plusplus(G, n, np.random.default_rng(seed))])


def typicality(X, knn):
    """1 / mean distance to the knn nearest other points; knn is clamped to len(X) - 1
    and a lone point scores 0. A point with knn exact duplicates scores inf."""
    knn = min(int(knn), len(X) - 1)
    if knn < 1:
        return np.zeros(len(X))
    dists, _ = NearestNeighbors(n_neighbors=knn + 1).fit(X).kneighbors(X)
    with np.errstate(divide='ignore'):
        return 1.0 / dists[:, 1:].mean(axis=1)


def typiclust_select(pool, state, B, knn=20, seed=0):
    """The most typical unlabeled point of each of the largest uncovered clusters."""
    n = batch_size(state, B)
    if knn < 1:
        raise ValueError(f'knn must be >= 1, got {knn}')
    train = pool.train_ids
    labeled = np.isin(train, state.labeled_ids)
    model = kmeans(pool.embeddings[train], min(state.n_labeled + int(B), len(train)), seed=seed)
    sizes = model.sizes()
    n_labeled = np.bincount(model.assignment[labeled], minlength=model.k)
    ranked = np.lexsort((np.arange(model.k), -sizes, n_labeled))

    picks = []
    for c in ranked:
        members = model.members(c)
        free = ~labeled[members]
        if not free.any():
            continue
        score = typicality(pool.embeddings[train[members]], knn)[free]
        cand = train[members[free]]
        picks.append(cand[np.lexsort((cand, -score))])
        if len(picks) == n:
            break
    return QueryBatch(ids=round_robin(picks, n))
