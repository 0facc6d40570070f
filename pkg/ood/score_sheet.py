import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ood.scores import OOD_KINDS, fit_class_stats, gradient_embeddings, pointwise_scorers, score_gradproj
from utils.utils import mkdir_if_missing, readonly

logger = logging.getLogger(__name__)

TPR = 95    # percent of labeled examples kept below the threshold


def fit_threshold(labeled_scores):
    """Nearest-rank 95th percentile: the ceil(0.95 m)-th smallest of m scores."""
    s = np.sort(np.asarray(labeled_scores, dtype=np.float64).reshape(-1))
    m = len(s)
    if m == 0:
        raise ValueError('cannot fit a threshold on zero labeled scores')
    rank = (TPR * m + 99) // 100
    return float(s[rank - 1])


@dataclass(frozen=True, eq=False)
class ScoreSheet:
    kind: str
    ids: np.ndarray             # unlabeled ids, in state order
    scores: np.ndarray          # aligned with ids
    tau: float
    labeled_scores: np.ndarray

    def __post_init__(self):
        assert len(self.ids) == len(self.scores), f'{len(self.ids)} ids for {len(self.scores)} scores'
        assert np.isfinite(self.scores).all() and np.isfinite(self.labeled_scores).all(), \
            f'non-finite {self.kind} scores'
        for name in ('ids', 'scores', 'labeled_scores'):
            object.__setattr__(self, name, readonly(getattr(self, name)))

    @property
    def flagged(self):
        return self.scores > self.tau

    def flagged_fraction(self):
        return float(self.flagged.mean()) if len(self.scores) else 0.0

    def to_frame(self):
        return pd.DataFrame({'id': self.ids, 'score': self.scores, 'flagged': self.flagged.astype(int)})


def score_pool(kind, head, pool, state, stats=None):
    """Score every unlabeled and labeled example and fit tau on the labeled scores."""
    if kind not in OOD_KINDS:
        raise ValueError(f'unknown OOD kind {kind!r}, expected one of {OOD_KINDS}')
    unlabeled = np.asarray(state.unlabeled_ids, dtype=np.int64)
    labeled = np.sort(state.labeled_ids)
    if kind == 'gradproj':
        if len(unlabeled):
            scores, projection = score_gradproj(head, pool, unlabeled, return_projection=True)
            labeled_scores = projection.project(gradient_embeddings(head, pool.embeddings[labeled]))
        else:
            scores, labeled_scores = np.zeros(0), np.zeros(len(labeled))
    else:
        if kind == 'mahalanobis' and stats is None:
            stats = fit_class_stats(pool, state)
        scorer = pointwise_scorers[kind]
        scores = scorer(head, stats, pool.embeddings[unlabeled]) if len(unlabeled) else np.zeros(0)
        labeled_scores = scorer(head, stats, pool.embeddings[labeled])
    sheet = ScoreSheet(kind=kind, ids=unlabeled, scores=np.asarray(scores, dtype=np.float64),
                       tau=fit_threshold(labeled_scores), labeled_scores=np.asarray(labeled_scores, dtype=np.float64))
    logger.debug('%s: tau=%.6g, %.1f%% of %d unlabeled flagged', kind, sheet.tau,
                 100 * sheet.flagged_fraction(), len(unlabeled))
    return sheet


def save_score_sheet(sheet, path):
    mkdir_if_missing(path)
    with open(path, 'w') as f:
        f.write(f'# kind={sheet.kind} tau={sheet.tau!r}\n')
        sheet.to_frame().to_csv(f, sep='\t', index=False, float_format='%.17g')
