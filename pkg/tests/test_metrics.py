import numpy as np
import pytest

from data.pool import init_label
from metrics import balanced_accuracy, known_class_accuracy, per_class_recall, stats_func
from model.linear_head import TrainConfig, predict_classes, train
from tests.conftest import make_pool


@pytest.fixture
def three_class_pool():
    # train rows 0-2, test rows 3-6 with labels 0, 1, 1, 2
    return make_pool(np.zeros((7, 2)), [0, 1, 2, 0, 1, 1, 2], test_ids=[3, 4, 5, 6])


def test_per_class_recall():
    recall = per_class_recall([0, 1, 0, 0], [0, 1, 1, 2], 4)
    np.testing.assert_allclose(recall, [1.0, 0.5, 0.0, 0.0])


def test_balanced_accuracy_hand_example(three_class_pool):
    assert balanced_accuracy([0, 1, 0, 0], three_class_pool) == pytest.approx(0.5)
    assert balanced_accuracy([0, 1, 1, 2], three_class_pool) == 1.0
    assert balanced_accuracy([1, 0, 0, 0], three_class_pool) == 0.0


def test_known_class_accuracy(three_class_pool):
    assert known_class_accuracy([0, 1, 0, 0], three_class_pool, {0, 1}) == pytest.approx(0.75)
    assert known_class_accuracy([0, 1, 0, 0], three_class_pool, set()) == 0.0


def test_prediction_count_mismatch(three_class_pool):
    with pytest.raises(ValueError, match='3 predictions for 4'):
        balanced_accuracy([0, 1, 2], three_class_pool)


def test_bounded_by_known_fraction(tiny_pool):
    for k1 in (1, 2, 4):
        state = init_label(tiny_pool, k1=k1, b=4 * k1, seed=0)
        head = train(tiny_pool, state, TrainConfig(epochs=20))
        predictions = predict_classes(head, tiny_pool.embeddings[tiny_pool.test_ids])
        acc = balanced_accuracy(predictions, tiny_pool)
        assert 0.0 <= acc <= len(state.known_classes) / tiny_pool.n_classes + 1e-12


def test_stats_func_signature(three_class_pool):
    scores = {name: func([0, 1, 0, 0], three_class_pool, {0, 1}) for name, func in stats_func.items()}
    assert scores == pytest.approx({'balanced_accuracy': 0.5, 'known_accuracy': 0.75})
