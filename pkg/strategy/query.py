from dataclasses import dataclass

import numpy as np
import pandas as pd

from utils.utils import mkdir_if_missing, readonly


@dataclass(frozen=True, eq=False)
class QueryBatch:
    ids: np.ndarray                     # selection order
    diagnostics: pd.DataFrame = None    # id, cluster, score, cluster_ratio (cluster-based strategies only)

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64).reshape(-1)
        assert len(np.unique(ids)) == len(ids), 'query batch has duplicate ids'
        object.__setattr__(self, 'ids', readonly(ids))

    def __len__(self):
        return len(self.ids)

    def save_diagnostics(self, path):
        frame = self.diagnostics if self.diagnostics is not None else pd.DataFrame({'id': self.ids})
        mkdir_if_missing(path)
        frame.to_csv(path, sep='\t', index=False, float_format='%.17g')


def batch_size(state, B):
    """min(B, |U_t|), rejecting a non-positive B or an exhausted pool."""
    if B < 1:
        raise ValueError(f'batch size must be >= 1, got {B}')
    if len(state.unlabeled_ids) == 0:
        raise ValueError(f'round {state.t}: no unlabeled examples left to query')
    return min(int(B), len(state.unlabeled_ids))


@dataclass(frozen=True, eq=False)
class ClusterOodSummary:
    size: np.ndarray
    flagged: np.ndarray
    ratio: np.ndarray
    mean_score: np.ndarray

    @property
    def k(self):
        return len(self.size)


def summarize_clusters(assignment, scores, tau, k):
    """Per-cluster size, flagged count, OOD ratio and mean score; empty clusters get
    ratio 0 and mean score -inf."""
    assignment = np.asarray(assignment, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    size = np.bincount(assignment, minlength=k)
    flagged = np.bincount(assignment, weights=(scores > tau).astype(np.float64), minlength=k).astype(np.int64)
    total = np.bincount(assignment, weights=scores, minlength=k)
    nonempty = size > 0
    ratio = np.zeros(k)
    ratio[nonempty] = flagged[nonempty] / size[nonempty]
    mean_score = np.full(k, -np.inf)
    mean_score[nonempty] = total[nonempty] / size[nonempty]
    return ClusterOodSummary(size=size, flagged=flagged, ratio=ratio, mean_score=mean_score)


def rank_clusters(summary):
    """Non-empty clusters by OOD ratio desc, then mean score desc, then index asc."""
    order = np.lexsort((np.arange(summary.k), -summary.mean_score, -summary.ratio))
    return order[summary.size[order] > 0]


def round_robin(ranked_lists, n):
    """Take the head of each list in rank order, then the second entries, and so on."""
    picks = []
    depth = 0
    while len(picks) < n and any(depth < len(lst) for lst in ranked_lists):
        for lst in ranked_lists:
            if depth < len(lst):
                picks.append(lst[depth])
                if len(picks) == n:
                    break
        depth += 1
    return np.asarray(picks, dtype=np.int64)


def order_by_score(positions, scores, ids):
    """positions sorted by score desc, ties to the lower example id."""
    positions = np.asarray(positions, dtype=np.int64)
    return positions[np.lexsort((ids[positions], -scores[positions]))]


def pick_from_clusters(assignment, scores, ids, ranked, n):
    """Positions of the n picks: the top-scored member of each ranked cluster first."""
    assignment = np.asarray(assignment, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    ids = np.asarray(ids, dtype=np.int64)
    members = [order_by_score(np.flatnonzero(assignment == c), scores, ids) for c in ranked]
    return round_robin(members, n)
