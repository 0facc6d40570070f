import numpy as np
from sklearn.metrics import confusion_matrix


def per_class_recall(predictions, labels, n_classes):
    """Recall of each class in [0, n_classes); a class with no examples gets 0."""
    cm = confusion_matrix(labels, predictions, labels=np.arange(n_classes))
    support = cm.sum(axis=1)
    recall = np.zeros(n_classes)
    np.divide(np.diag(cm), support, out=recall, where=support > 0)
    return recall


def _test_labels(predictions, pool):
    predictions = np.asarray(predictions, dtype=np.int64).reshape(-1)
    if len(predictions) != len(pool.test_ids):
        raise ValueError(f'{len(predictions)} predictions for {len(pool.test_ids)} test examples')
    return predictions, pool.labels[pool.test_ids]


def balanced_accuracy(predictions, pool):
    """Mean recall over all K classes; classes the head cannot output score 0."""
    predictions, labels = _test_labels(predictions, pool)
    return float(per_class_recall(predictions, labels, pool.n_classes).mean())


def known_class_accuracy(predictions, pool, known_classes):
    """Mean recall restricted to the classes the head knows."""
    predictions, labels = _test_labels(predictions, pool)
    known = np.asarray(sorted(known_classes), dtype=np.int64)
    if len(known) == 0:
        return 0.0
    return float(per_class_recall(predictions, labels, pool.n_classes)[known].mean())


stats_func = {
    'balanced_accuracy': lambda predictions, pool, known: balanced_accuracy(predictions, pool),
    'known_accuracy': known_class_accuracy,
}
