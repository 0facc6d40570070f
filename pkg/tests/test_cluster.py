from itertools import combinations

import numpy as np
import pytest
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from cluster.cluster_lib import cluster_dict, partition
from cluster.common import assign, repair_empty
from cluster.gmm import _e_step, gmm_em
from cluster.kcenter import covering_radius, kcenter_greedy, kcenter_partition
from cluster.kmeans import kmeans, kmeans_plusplus, minibatch_kmeans


def splits_blobs(assignment):
    a, b = assignment[:30], assignment[30:]
    return len(set(a)) == 1 and len(set(b)) == 1 and a[0] != b[0]


def test_assign_ties_go_to_lower_index():
    labels, dists = assign(np.array([[0.0], [1.0]]), np.array([[-1.0], [1.0], [-1.0]]))
    assert labels.tolist() == [0, 1]
    assert dists.tolist() == [1.0, 0.0]


def test_repair_fills_empty_cluster_with_farthest_point():
    X = np.array([[0.0], [1.0], [5.0]])
    C = np.array([[0.5], [100.0]])
    labels, dists = assign(X, C)
    C, labels, dists = repair_empty(X, C, labels, dists)
    assert labels.tolist() == [0, 0, 1]
    assert C[1, 0] == 5.0


def test_kmeans_separates_blobs(two_blobs):
    X, _ = two_blobs
    model = kmeans(X, 2, seed=0)
    assert splits_blobs(model.assignment)
    assert model.objective == pytest.approx(model.history[-1])
    assert sorted(model.centroids[:, 0].round()) == [0.0, 20.0]


def test_kmeans_cost_nonincreasing():
    X = np.random.default_rng(0).normal(size=(200, 3))
    history = kmeans(X, 5, seed=1).history
    assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))


def test_kmeans_invariants_on_random_fixtures():
    for i in range(50):
        rng = np.random.default_rng(100 + i)
        M, d = int(rng.integers(20, 150)), int(rng.integers(1, 6))
        X = rng.normal(size=(M, d)) * rng.uniform(0.5, 3.0, size=d)
        model = kmeans(X, int(rng.integers(1, 9)), seed=i)
        assert all(b <= a + 1e-9 for a, b in zip(model.history, model.history[1:]))
        brute = ((X[:, None, :] - model.centroids[None, :, :]) ** 2).sum(axis=2)
        np.testing.assert_array_equal(model.assignment, np.argmin(brute, axis=1))
        assert model.objective == pytest.approx(brute.min(axis=1).sum(), rel=1e-12)


def test_kmeans_single_cluster_is_global_mean():
    X = np.random.default_rng(5).normal(size=(40, 3)) + [2.0, 0.0, -4.0]
    model = kmeans(X, 1)
    np.testing.assert_allclose(model.centroids[0], X.mean(axis=0), rtol=1e-12, atol=1e-12)
    assert model.objective == pytest.approx(((X - X.mean(axis=0)) ** 2).sum(), rel=1e-12)
    assert (model.assignment == 0).all()


def test_kmeans_deterministic(two_blobs):
    X, _ = two_blobs
    a, b = kmeans(X, 3, seed=7), kmeans(X, 3, seed=7)
    np.testing.assert_array_equal(a.assignment, b.assignment)
    assert a.centroids.tobytes() == b.centroids.tobytes()


def test_kmeans_clamps_k():
    model = kmeans(np.arange(3.0)[:, None], 10)
    assert model.k == 3
    assert sorted(model.assignment.tolist()) == [0, 1, 2]
    assert model.objective == 0.0


def test_kmeans_identical_points_no_empty_clusters():
    model = kmeans(np.ones((6, 2)), 3, seed=0)
    assert (model.sizes() >= 1).all()
    assert model.objective == 0.0


@pytest.mark.parametrize('kind', sorted(cluster_dict))
def test_every_kind_splits_blobs(two_blobs, kind):
    X, _ = two_blobs
    model = partition(kind, X, 2, seed=0)
    assert model.k == 2
    assert model.assignment.shape == (60,)
    assert (model.sizes() >= 1).all()
    assert splits_blobs(model.assignment)


def test_partition_unknown_kind(two_blobs):
    with pytest.raises(ValueError, match='dbscan'):
        partition('dbscan', two_blobs[0], 2)


def test_points_validation():
    X = np.zeros((4, 2))
    X[2, 0] = np.inf
    with pytest.raises(ValueError, match='point 2'):
        kmeans(X, 2)
    with pytest.raises(ValueError, match='k must be'):
        kmeans(np.zeros((4, 2)), 0)
    with pytest.raises(ValueError):
        kmeans(np.zeros((0, 2)), 1)


def test_kmeans_plusplus_distinct():
    X = np.vstack([np.zeros((5, 2)), np.ones((2, 2))])
    for seed in range(20):
        idx = kmeans_plusplus(X, 4, np.random.default_rng(seed))
        assert len(set(idx.tolist())) == 4


def test_kmeans_plusplus_prefers_far_points():
    X = np.vstack([np.zeros((50, 1)), [[1000.0]]])
    hits = sum(50 in kmeans_plusplus(X, 2, np.random.default_rng(s)).tolist() for s in range(100))
    assert hits >= 95


def test_minibatch_handles_small_batches(two_blobs):
    X, _ = two_blobs
    model = minibatch_kmeans(X, 2, seed=0, batch=8)
    assert splits_blobs(model.assignment)
    with pytest.raises(ValueError, match='batch'):
        minibatch_kmeans(X, 2, batch=0)


def test_gmm_likelihood_nondecreasing():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        X = np.vstack([rng.normal(size=(80, 2)), rng.normal(size=(80, 2)) * 2 + [6.0, 0.0]])
        model = gmm_em(X, 2 + seed % 3, seed=seed)
        assert all(b >= a - 1e-9 * max(1.0, abs(a)) for a, b in zip(model.history, model.history[1:]))
        assert model.objective == model.history[-1]


def test_gmm_single_component_is_global_fit():
    X = np.random.default_rng(4).normal(size=(50, 3)) * [1.0, 2.0, 0.5] + [3.0, -1.0, 0.0]
    model = gmm_em(X, 1, reg=1e-6)
    np.testing.assert_allclose(model.centroids[0], X.mean(axis=0), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(model.variances[0], X.var(axis=0) + 1e-6, rtol=1e-9)
    assert model.weights.tolist() == [1.0]
    assert (model.assignment == 0).all()


def test_gmm_e_step_matches_gaussian_density():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(40, 3)) * 5 + 20.0
    weights = np.array([0.2, 0.5, 0.3])
    means = rng.normal(size=(3, 3)) * 5 + 20.0
    variances = rng.uniform(0.5, 3.0, size=(3, 3))
    ll, log_resp = _e_step(X, weights, means, variances)
    log_prob = np.stack([multivariate_normal.logpdf(X, means[j], np.diag(variances[j])) + np.log(weights[j])
                         for j in range(3)], axis=1)
    np.testing.assert_allclose(log_resp, log_prob - logsumexp(log_prob, axis=1, keepdims=True), atol=1e-9)
    assert ll == pytest.approx(logsumexp(log_prob, axis=1).sum(), rel=1e-12)


def test_gmm_rejects_bad_reg(two_blobs):
    with pytest.raises(ValueError, match='reg'):
        gmm_em(two_blobs[0], 2, reg=0.0)


def test_kcenter_greedy_hand_trace():
    X = np.array([[0.0], [1.0], [2.0], [10.0]])
    assert kcenter_greedy(X, 2) == [0, 3]
    assert kcenter_greedy(X, 1, seed_centers=[3]) == [0]
    assert kcenter_greedy(X, 3) == [0, 3, 2]
    assert covering_radius(X, [0, 3, 2]) == 1.0


def test_kcenter_ties_to_lower_index():
    assert kcenter_greedy(np.array([[0.0], [-5.0], [5.0]]), 2) == [0, 1]


def test_kcenter_budget_errors():
    X = np.zeros((3, 1))
    with pytest.raises(ValueError, match='exceeds'):
        kcenter_greedy(X, 3, seed_centers=[0])
    with pytest.raises(ValueError, match='budget'):
        kcenter_greedy(X, 0)


def test_kcenter_within_twice_optimal():
    rng = np.random.default_rng(3)
    for _ in range(5):
        X = rng.normal(size=(9, 2))
        greedy = covering_radius(X, kcenter_greedy(X, 3))
        best = min(covering_radius(X, list(c)) for c in combinations(range(9), 3))
        assert greedy <= 2 * best + 1e-12


def test_kcenter_partition_assigns_to_nearest_center():
    X = np.array([[0.0], [1.0], [9.0], [10.0]])
    model = kcenter_partition(X, 2)
    assert model.assignment.tolist() == [0, 0, 1, 1]
