"""Per-example OOD scores. Every scorer is oriented so that a higher value means
the example is more likely to come from a class the head has not seen."""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from model.linear_head import head_gradient, predict
from utils.utils import readonly

logger = logging.getLogger(__name__)

OOD_KINDS = ('energy', 'margin', 'gradnorm', 'mahalanobis', 'gradproj')


def score_energy(post):
    return -logsumexp(post.logits, axis=-1)


def score_margin(post):
    """Negated top-two probability gap; a single-output head has margin 1."""
    probs = np.sort(post.probs, axis=-1)
    second = probs[..., -2] if probs.shape[-1] > 1 else 0.0
    return -(probs[..., -1] - second)


def score_gradnorm(head, x):
    """Negated L2 norm of the uniform-target gradient over (W, b).

    The gradient is (p - u) x^T stacked with (p - u), so its norm factors as
    ||p - u|| * sqrt(||x||^2 + 1); no per-example gradient is materialised.
    """
    x = np.asarray(x, dtype=np.float64)
    probs = predict(head, x).probs
    dev = np.linalg.norm(probs - 1.0 / head.n_outputs, axis=-1)
    return -dev * np.sqrt((x * x).sum(axis=-1) + 1.0)


@dataclass(frozen=True, eq=False)
class ClassStats:
    classes: tuple          # global class ids, ascending
    means: np.ndarray       # (|K|, d)
    cov: np.ndarray         # (d, d) pooled within-class covariance, unregularised
    shrinkage: float

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        cov = np.asarray(self.cov, dtype=np.float64)
        assert len(self.classes) == len(means), f'{len(self.classes)} classes for {len(means)} means'
        assert cov.shape == (means.shape[1],) * 2, f'covariance shape {cov.shape} does not match d={means.shape[1]}'
        if self.shrinkage < 0:
            raise ValueError(f'shrinkage must be >= 0, got {self.shrinkage}')
        try:
            chol = linalg.cholesky(cov + self.shrinkage * np.eye(len(cov)), lower=True)
        except linalg.LinAlgError as e:
            raise ValueError(f'covariance is not positive definite with shrinkage {self.shrinkage}') from e
        object.__setattr__(self, 'means', readonly(means))
        object.__setattr__(self, 'cov', readonly(cov))
        object.__setattr__(self, 'chol', readonly(chol))
        object.__setattr__(self, 'white_means', readonly(self.whiten(means)))

    def whiten(self, Z):
        """L^-1 z for the Cholesky factor L of cov + shrinkage * I, row-wise."""
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        return linalg.solve_triangular(self.chol, Z.T, lower=True).T


def default_shrinkage(cov):
    tr = float(np.trace(cov))
    return 1e-3 * tr / len(cov) if tr > 0 else 1e-3


def fit_class_stats(pool, state, shrinkage=None):
    classes = state.sorted_known_classes()
    if not classes:
        raise ValueError('class statistics need at least one labeled example')
    ids = np.sort(state.labeled_ids)
    X, y = pool.embeddings[ids], pool.labels[ids]
    local = np.searchsorted(classes, y)
    counts = np.bincount(local, minlength=len(classes))
    sums = np.zeros((len(classes), pool.d))
    np.add.at(sums, local, X)
    means = sums / counts[:, None]
    centered = X - means[local]
    cov = centered.T @ centered / max(1, len(ids) - len(classes))
    if shrinkage is None:
        shrinkage = default_shrinkage(cov)
    return ClassStats(classes=tuple(classes), means=means, cov=cov, shrinkage=float(shrinkage))


def score_mahalanobis(stats, z):
    """Squared Mahalanobis distance to the nearest known-class mean; (d,) or (n, d)."""
    z = np.asarray(z, dtype=np.float64)
    dists = cdist(stats.whiten(z), stats.white_means, 'sqeuclidean').min(axis=1)
    return dists if z.ndim == 2 else float(dists[0])


def top_singular_vector(A, tol=1e-8, max_iter=1000):
    """Leading right singular vector of A by power iteration on A^T A.

    The sign is fixed so the largest-magnitude entry is positive. Returns None when
    A is zero or the iteration collapses to zero.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if not np.any(A):
        return None
    v = np.random.default_rng(0).standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    for it in range(max_iter):
        w = A.T @ (A @ v)
        norm = np.linalg.norm(w)
        if norm == 0:
            return None
        w /= norm
        converged = np.linalg.norm(w - v) < tol
        v = w
        if converged:
            break
    else:
        logger.debug('power iteration stopped at max_iter=%d', max_iter)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return v


@dataclass(frozen=True, eq=False)
class GradientProjection:
    center: np.ndarray
    direction: np.ndarray = None    # None for a degenerate (all-equal) gradient set

    @classmethod
    def fit(cls, G):
        G = np.atleast_2d(np.asarray(G, dtype=np.float64))
        center = G.mean(axis=0)
        return cls(center=center, direction=top_singular_vector(G - center))

    def project(self, G):
        G = np.atleast_2d(np.asarray(G, dtype=np.float64))
        if self.direction is None:
            return np.zeros(len(G))
        return np.abs((G - self.center) @ self.direction)


def gradient_embeddings(head, X):
    """Cross-entropy gradients at the predicted label, one row per embedding."""
    return head_gradient(head, np.atleast_2d(np.asarray(X, dtype=np.float64)), 'predicted')


def score_gradproj(head, pool, unlabeled_ids, return_projection=False):
    ids = np.asarray(unlabeled_ids, dtype=np.int64)
    if len(ids) < 1:
        raise ValueError('gradient projection needs at least one unlabeled example')
    G = gradient_embeddings(head, pool.embeddings[ids])
    projection = GradientProjection.fit(G)
    scores = projection.project(G)
    return (scores, projection) if return_projection else scores


pointwise_scorers = {
    'energy': lambda head, stats, X: score_energy(predict(head, X)),
    'margin': lambda head, stats, X: score_margin(predict(head, X)),
    'gradnorm': lambda head, stats, X: score_gradnorm(head, X),
    'mahalanobis': lambda head, stats, X: score_mahalanobis(stats, X),
}
