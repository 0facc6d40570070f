import os

import numpy as np
import pytest

from data.pool import EmbeddedPool, LongTailSpec, RoundState, synth_longtail
from model.linear_head import TrainConfig, train

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def make_pool(embeddings, labels, test_ids, n_classes=None):
    labels = np.asarray(labels, dtype=np.int64)
    return EmbeddedPool(embeddings=np.asarray(embeddings, dtype=np.float64), labels=labels,
                        n_classes=n_classes or int(labels.max()) + 1, test_ids=test_ids)


@pytest.fixture
def tiny_spec():
    return LongTailSpec(n_classes=10, n0=40, alpha=0.1, dim=8, separation=8.0, seed=0)


@pytest.fixture
def tiny_pool(tiny_spec):
    return synth_longtail(tiny_spec)


@pytest.fixture
def two_blobs():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(30, 2)) * 0.3
    b = rng.normal(size=(30, 2)) * 0.3 + [20.0, 0.0]
    return np.vstack([a, b]), np.repeat([0, 1], 30)


@pytest.fixture
def mirror_setup():
    """Two classes mirrored in x and in y, fully labeled, plus far unlabeled points on the y axis.

    Full-batch training keeps the head's y-weights and biases at ~0, so the far points get an
    almost exactly uniform posterior.
    """
    rng = np.random.default_rng(1)
    base = rng.normal(size=(20, 2)) * 0.5 + [5.0, 0.0]
    class1 = np.vstack([base, base * [1.0, -1.0]])
    class0 = class1 * [-1.0, 1.0]
    far = np.array([[0.0, 40.0], [0.0, 45.0], [0.0, 50.0], [0.0, -50.0]])
    embeddings = np.vstack([class0, class1, [[-5.0, 0.0], [5.0, 0.0]], far])
    labels = np.concatenate([np.zeros(40), np.ones(40), [0, 1], np.zeros(len(far))])
    pool = make_pool(embeddings, labels, test_ids=[80, 81])
    state = RoundState.from_labeled(pool, np.arange(80))
    head = train(pool, state, TrainConfig(learning_rate=0.5, epochs=200, minibatch=128, weight_decay=0.0))
    return pool, state, head
