"""Embedding pools, long-tail synthesis, initial labeling and the label oracle."""
import math
import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import gammaln

from utils.utils import readonly

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EmbeddedPool:
    """N examples as d-dim embeddings with hidden labels and a held-out test split.

    Arrays are made read-only on construction; the pool can be shared freely.
    """
    embeddings: np.ndarray      # (N, d) float64
    labels: np.ndarray          # (N,) int64 in [0, n_classes)
    n_classes: int
    test_ids: np.ndarray        # sorted
    train_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        embeddings = np.asarray(self.embeddings, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        test_ids = np.unique(np.asarray(self.test_ids, dtype=np.int64))
        if self.train_ids is None:
            train_ids = np.setdiff1d(np.arange(len(labels)), test_ids)
        else:
            train_ids = np.unique(np.asarray(self.train_ids, dtype=np.int64))
        object.__setattr__(self, 'embeddings', readonly(embeddings))
        object.__setattr__(self, 'labels', readonly(labels))
        object.__setattr__(self, 'n_classes', int(self.n_classes))
        object.__setattr__(self, 'test_ids', readonly(test_ids))
        object.__setattr__(self, 'train_ids', readonly(train_ids))
        validate_pool(self)

    @property
    def N(self):
        return self.embeddings.shape[0]

    @property
    def d(self):
        return self.embeddings.shape[1]

    def train_class_sizes(self):
        return np.bincount(self.labels[self.train_ids], minlength=self.n_classes)

    def test_class_sizes(self):
        return np.bincount(self.labels[self.test_ids], minlength=self.n_classes)

    def same_contents(self, other):
        return (self.n_classes == other.n_classes
                and np.array_equal(self.embeddings, other.embeddings)
                and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.test_ids, other.test_ids))


def validate_pool(pool):
    N = pool.labels.shape[0]
    if pool.embeddings.ndim != 2 or pool.embeddings.shape[0] != N:
        raise ValueError(f'embeddings must be (N, d) with N={N}, got {pool.embeddings.shape}')
    if pool.n_classes < 1:
        raise ValueError(f'n_classes must be >= 1, got {pool.n_classes}')
    bad = np.flatnonzero((pool.labels < 0) | (pool.labels >= pool.n_classes))
    if len(bad):
        raise ValueError(f'row {bad[0]}: label {pool.labels[bad[0]]} outside [0, {pool.n_classes})')
    bad = np.flatnonzero(~np.isfinite(pool.embeddings).all(axis=1))
    if len(bad):
        raise ValueError(f'row {bad[0]}: non-finite embedding value')
    if len(pool.test_ids) and (pool.test_ids[0] < 0 or pool.test_ids[-1] >= N):
        raise ValueError(f'test ids must lie in [0, {N})')
    if len(np.intersect1d(pool.train_ids, pool.test_ids)):
        raise ValueError('train_ids and test_ids overlap')
    if len(pool.train_ids) + len(pool.test_ids) != N:
        raise ValueError('train_ids and test_ids must partition [0, N)')
    for split, ids in (('train', pool.train_ids), ('test', pool.test_ids)):
        missing = np.flatnonzero(np.bincount(pool.labels[ids], minlength=pool.n_classes) == 0)
        if len(missing):
            raise ValueError(f'class {missing[0]} has no {split} example')


@dataclass(frozen=True)
class LongTailSpec:
    n_classes: int
    n0: int
    alpha: float
    dim: int
    separation: float
    seed: int = 0
    imbalance: str = 'exp'
    test_fraction: float = 0.2

    def validate(self):
        for name in ('alpha', 'separation', 'test_fraction'):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f'{name} must be finite, got {getattr(self, name)}')
        if self.n_classes < 2:
            raise ValueError(f'n_classes must be >= 2, got {self.n_classes}')
        if self.n0 < 1:
            raise ValueError(f'n0 must be >= 1, got {self.n0}')
        if not 0 < self.alpha <= 1:
            raise ValueError(f'alpha must be in (0, 1], got {self.alpha}')
        if self.dim < 2:
            raise ValueError(f'dim must be >= 2, got {self.dim}')
        if self.separation < 0:
            raise ValueError(f'separation must be >= 0, got {self.separation}')
        if not 0 < self.test_fraction <= 1:
            raise ValueError(f'test_fraction must be in (0, 1], got {self.test_fraction}')
        if self.imbalance not in ('exp', 'step'):
            raise ValueError(f'unknown imbalance profile {self.imbalance!r}')

    @classmethod
    def from_dict(cls, d):
        return cls(n_classes=int(d['n_classes']), n0=int(d['n0']), alpha=float(d['alpha']),
                   dim=int(d['dim']), separation=float(d['separation']), seed=int(d.get('seed', 0)),
                   imbalance=d.get('imbalance', 'exp'), test_fraction=float(d.get('test_fraction', 0.2)))


def longtail_class_sizes(n_classes, n0, alpha, imbalance='exp'):
    """Training size of each class: max(1, floor(n0 * alpha^(i/n))) for the exp profile."""
    sizes = []
    for i in range(n_classes):
        if imbalance == 'exp':
            num = n0 * alpha ** (i / n_classes)
        elif imbalance == 'step':
            num = n0 if i < n_classes // 2 else n0 * alpha
        else:
            raise ValueError(f'unknown imbalance profile {imbalance!r}')
        sizes.append(max(1, int(math.floor(num + 1e-9))))
    return np.array(sizes, dtype=np.int64)


def holdout_sizes(train_sizes, test_fraction=0.2):
    frac = Fraction(str(test_fraction))
    return np.array([max(1, math.ceil(frac * int(n))) for n in train_sizes], dtype=np.int64)


def center_scale(dim, separation):
    """Per-coordinate std of the class centers so that E||c_i - c_j|| = separation.

    c_i - c_j ~ N(0, 2 s^2 I_d), whose norm has mean 2 s Gamma((d+1)/2) / Gamma(d/2).
    """
    return separation / (2.0 * math.exp(gammaln((dim + 1) / 2) - gammaln(dim / 2)))


def synth_longtail(spec):
    spec.validate()
    sizes = longtail_class_sizes(spec.n_classes, spec.n0, spec.alpha, spec.imbalance)
    test_sizes = holdout_sizes(sizes, spec.test_fraction)

    rng = np.random.default_rng(spec.seed)
    sigma_c = center_scale(spec.dim, spec.separation)
    centers = rng.normal(0.0, sigma_c, size=(spec.n_classes, spec.dim))

    embeddings, labels, test_ids = [], [], []
    offset = 0
    for i, (n_train, n_test) in enumerate(zip(sizes, test_sizes)):
        n_total = int(n_train + n_test)
        embeddings.append(centers[i] + rng.normal(size=(n_total, spec.dim)))
        labels.append(np.full(n_total, i, dtype=np.int64))
        test_ids.append(np.arange(offset + n_train, offset + n_total))
        offset += n_total

    # float32-representable so the binary pool format round-trips exactly
    embeddings = np.concatenate(embeddings).astype(np.float32).astype(np.float64)
    pool = EmbeddedPool(embeddings=embeddings, labels=np.concatenate(labels),
                        n_classes=spec.n_classes, test_ids=np.concatenate(test_ids))
    logger.info('synthesized long-tail pool: K=%d, train=%d, test=%d, largest=%d, smallest=%d',
                spec.n_classes, len(pool.train_ids), len(pool.test_ids), sizes.max(), sizes.min())
    return pool


@dataclass(frozen=True, eq=False)
class RoundState:
    """Active-learning state at round t. Transitions produce new states."""
    t: int
    labeled_ids: np.ndarray         # labeling order
    unlabeled_ids: np.ndarray       # ascending
    known_classes: frozenset

    @classmethod
    def from_labeled(cls, pool, labeled_ids, t=1):
        labeled_ids = np.asarray(labeled_ids, dtype=np.int64).reshape(-1)
        if len(np.unique(labeled_ids)) != len(labeled_ids):
            raise ValueError('labeled ids must be pairwise distinct')
        outside = np.setdiff1d(labeled_ids, pool.train_ids)
        if len(outside):
            raise ValueError(f'id {outside[0]} is not a training example')
        unlabeled_ids = np.setdiff1d(pool.train_ids, labeled_ids)
        known = frozenset(int(c) for c in np.unique(pool.labels[labeled_ids]))
        return cls(t=int(t), labeled_ids=readonly(labeled_ids.copy()),
                   unlabeled_ids=readonly(unlabeled_ids), known_classes=known)

    @property
    def n_labeled(self):
        return len(self.labeled_ids)

    def sorted_known_classes(self):
        return sorted(self.known_classes)


def init_label(pool, k1, b, seed):
    """Label b examples spread evenly over the k1 largest training classes."""
    if not 1 <= k1 <= pool.n_classes:
        raise ValueError(f'k1 must be in [1, {pool.n_classes}], got {k1}')
    if b < k1:
        raise ValueError(f'initial batch b={b} must be >= k1={k1}')
    sizes = pool.train_class_sizes()
    order = np.lexsort((np.arange(pool.n_classes), -sizes))
    selected = order[:k1]

    rng = np.random.default_rng(seed)
    train_labels = pool.labels[pool.train_ids]
    labeled = []
    for rank, c in enumerate(selected):
        quota = b // k1 + (1 if rank < b % k1 else 0)
        members = pool.train_ids[train_labels == c]
        if len(members) < quota:
            raise ValueError(f'class {c} has {len(members)} training examples, fewer than its quota {quota}')
        labeled.append(rng.choice(members, size=quota, replace=False))
    return RoundState.from_labeled(pool, np.concatenate(labeled), t=1)


def oracle_label(pool, state, query_ids):
    query_ids = np.asarray(query_ids, dtype=np.int64).reshape(-1)
    if len(np.unique(query_ids)) != len(query_ids):
        raise ValueError('query ids must be pairwise distinct')
    out_of_range = query_ids[(query_ids < 0) | (query_ids >= pool.N)]
    if len(out_of_range):
        raise ValueError(f'id {out_of_range[0]} out of range [0, {pool.N})')
    not_unlabeled = np.setdiff1d(query_ids, state.unlabeled_ids)
    if len(not_unlabeled):
        i = not_unlabeled[0]
        why = 'already labeled' if i in set(state.labeled_ids.tolist()) else 'not in the unlabeled pool'
        raise ValueError(f'id {i} is {why}')
    return RoundState.from_labeled(pool, np.concatenate([state.labeled_ids, query_ids]), t=state.t + 1)


def class_counts(state, pool):
    return np.bincount(pool.labels[state.labeled_ids], minlength=pool.n_classes)
