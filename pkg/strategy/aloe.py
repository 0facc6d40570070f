"""Cluster-then-filter selection: cluster the unlabeled pool for diversity, keep the
clusters richest in likely-OOD examples, and query the most OOD member of each."""
import logging

import numpy as np
import pandas as pd

from cluster.cluster_lib import partition
from model.linear_head import predict
from ood.score_sheet import score_pool
from strategy.query import (QueryBatch, batch_size, order_by_score, pick_from_clusters, rank_clusters,
                            summarize_clusters)

logger = logging.getLogger(__name__)

FEATURES = ('embedding', 'embedding+logits')


def cluster_features(pool, ids, head, feature='embedding'):
    X = pool.embeddings[ids]
    if feature == 'embedding':
        return X
    if feature == 'embedding+logits':
        return np.hstack([X, predict(head, X).logits])
    raise ValueError(f'unknown cluster feature {feature!r}, expected one of {FEATURES}')


def _diagnostics(ids, positions, assignment, sheet, summary):
    clusters = assignment[positions]
    return pd.DataFrame({'id': ids[positions], 'cluster': clusters, 'score': sheet.scores[positions],
                         'cluster_ratio': summary.ratio[clusters]})


def aloe_select(pool, state, head, B, ood_kind='gradnorm', cluster_kind='kmeans', multiplier=2, seed=0,
                feature='embedding', sheet=None):
    n = batch_size(state, B)
    if multiplier < 1:
        raise ValueError(f'multiplier must be >= 1, got {multiplier}')
    ids = np.asarray(state.unlabeled_ids, dtype=np.int64)
    sheet = sheet if sheet is not None else score_pool(ood_kind, head, pool, state)

    # step 1: a surplus of clusters over the unlabeled pool
    k = int(multiplier) * max(int(B), len(state.known_classes))
    model = partition(cluster_kind, cluster_features(pool, ids, head, feature), k, seed=seed)

    # step 2: rank clusters by the share of examples beyond tau
    summary = summarize_clusters(model.assignment, sheet.scores, sheet.tau, model.k)
    ranked = rank_clusters(summary)

    # step 3: the most OOD example of each top cluster
    positions = pick_from_clusters(model.assignment, sheet.scores, ids, ranked, n)
    logger.debug('aloe round %d: k=%d clusters, %d with flagged members, tau=%.6g', state.t, model.k,
                 int((summary.flagged > 0).sum()), sheet.tau)
    return QueryBatch(ids=ids[positions], diagnostics=_diagnostics(ids, positions, model.assignment, sheet, summary))


def reverse_aloe_select(pool, state, head, B, ood_kind='gradnorm', cluster_kind='kmeans', seed=0,
                        feature='embedding', sheet=None):
    """Filter-then-cluster: keep examples beyond tau, then diversify among them."""
    n = batch_size(state, B)
    ids = np.asarray(state.unlabeled_ids, dtype=np.int64)
    sheet = sheet if sheet is not None else score_pool(ood_kind, head, pool, state)
    candidates = np.flatnonzero(sheet.flagged)

    if len(candidates) < n:
        rest = order_by_score(np.flatnonzero(~sheet.flagged), sheet.scores, ids)
        positions = np.concatenate([order_by_score(candidates, sheet.scores, ids), rest[:n - len(candidates)]])
        logger.debug('reverse aloe round %d: only %d candidates for %d picks', state.t, len(candidates), n)
        return QueryBatch(ids=ids[positions], diagnostics=pd.DataFrame({
            'id': ids[positions], 'cluster': -1, 'score': sheet.scores[positions],
            'cluster_ratio': np.nan}))

    model = partition(cluster_kind, cluster_features(pool, ids[candidates], head, feature), n, seed=seed)
    summary = summarize_clusters(model.assignment, sheet.scores[candidates], sheet.tau, model.k)
    local = pick_from_clusters(model.assignment, sheet.scores[candidates], ids[candidates],
                               rank_clusters(summary), n)
    positions = candidates[local]
    diagnostics = pd.DataFrame({'id': ids[positions], 'cluster': model.assignment[local],
                                'score': sheet.scores[positions],
                                'cluster_ratio': summary.ratio[model.assignment[local]]})
    return QueryBatch(ids=ids[positions], diagnostics=diagnostics)
