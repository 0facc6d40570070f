"""Diagonal-covariance Gaussian mixture fitted by EM, initialised from k-means."""
import logging

import numpy as np
from scipy.special import logsumexp

from cluster.common import ClusterModel, check_k, check_points
from cluster.kmeans import kmeans

logger = logging.getLogger(__name__)


class ClusterCollapseError(RuntimeError):
    pass


def _m_step(X, resp, reg):
    nk = resp.sum(axis=0)
    if (nk < 10 * np.finfo(np.float64).eps).any():
        raise ClusterCollapseError(f'mixture component {int(np.argmin(nk))} lost all responsibility')
    weights = nk / len(X)
    means = resp.T @ X / nk[:, None]
    avg_x2 = resp.T @ (X * X) / nk[:, None]
    variances = np.maximum(avg_x2 - means ** 2, 0.0) + reg
    return weights, means, variances


def _e_step(X, weights, means, variances):
    # log N(x | mu, diag(var)) + log pi, shape (M, k)
    log_det = np.log(variances).sum(axis=1)
    precision = 1.0 / variances
    maha = (X * X) @ precision.T - 2.0 * X @ (means * precision).T + (means ** 2 * precision).sum(axis=1)[None, :]
    maha = np.maximum(maha, 0.0)
    log_prob = -0.5 * (X.shape[1] * np.log(2 * np.pi) + log_det[None, :] + maha) + np.log(weights)[None, :]
    log_norm = logsumexp(log_prob, axis=1)
    return float(log_norm.sum()), log_prob - log_norm[:, None]


def gmm_em(points, k, seed=0, max_iter=100, tol=1e-6, reg=1e-6):
    X = check_points(points)
    M = len(X)
    k = check_k(k, M)
    if not reg > 0:
        raise ValueError(f'reg must be > 0, got {reg}')
    if max_iter < 1:
        raise ValueError(f'max_iter must be >= 1, got {max_iter}')

    init = kmeans(X, k, seed=seed)
    resp = np.eye(k)[init.assignment]
    params = _m_step(X, resp, reg)
    ll, log_resp = _e_step(X, *params)
    history = [ll]
    for it in range(max_iter):
        params = _m_step(X, np.exp(log_resp), reg)
        ll_new, log_resp = _e_step(X, *params)
        history.append(ll_new)
        if ll_new < ll - 1e-9 * max(1.0, abs(ll)):
            logger.warning('EM log-likelihood decreased: %.10f -> %.10f', ll, ll_new)
        converged = abs(ll_new - ll) < tol * M
        ll = ll_new
        if converged:
            break

    weights, means, variances = params
    return ClusterModel(k=k, centroids=means, assignment=np.argmax(log_resp, axis=1),
                        objective=ll, history=history, variances=variances, weights=weights)
