"""Feature clustering and the Gaussian-to-SPD embedding."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import DimensionMismatchError, EmptyClusterError, EmptyInputError
from .symmat import certify_spd, cholesky
from .validation import check_features


@dataclass(frozen=True, eq=False)
class GaussianCluster:
    mean: np.ndarray
    covariance: np.ndarray
    count: int

    @property
    def dim(self):
        return self.mean.shape[0]


def _kmeans_pp(X, k, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def _assign(X, centers):
    d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    return np.argmin(d2, axis=1), d2


def _repair_empty(X, labels, centers, k):
    # an empty cluster takes the point farthest from its own centroid,
    # drawn only from clusters that can spare one
    for c in range(k):
        counts = np.bincount(labels, minlength=k)
        if counts[c] > 0:
            continue
        own = np.sum((X - centers[labels]) ** 2, axis=1)
        donors = counts[labels] > 1
        own = np.where(donors, own, -1.0)
        idx = int(np.argmax(own))
        labels[idx] = c
        centers[c] = X[idx]
    return labels


def kmeans(features, n_clusters, n_iter=20, seed=0):
    """Lloyd k-means with k-means++ seeding and no empty clusters.

    ``n_clusters`` is clamped to the number of samples. An empty cluster is
    refilled with the point lying farthest from its current centroid.

    Parameters
    ----------
    features : ndarray, shape (n_samples, d)
    n_clusters : int
    n_iter : int
        Number of Lloyd iterations; stops early once assignments settle.
    seed : int
        Seed of the ``numpy`` PCG64 generator used for seeding.

    Returns
    -------
    list of ndarray
        Sample indices of each cluster, every one non-empty.
    """
    X = check_features(features)
    n = X.shape[0]
    k = max(1, min(int(n_clusters), n))
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(X, k, rng)
    labels, _ = _assign(X, centers)
    labels = _repair_empty(X, labels, centers, k)
    for _ in range(n_iter):
        centers = np.array([X[labels == c].mean(axis=0) for c in range(k)])
        new_labels, _ = _assign(X, centers)
        new_labels = _repair_empty(X, new_labels, centers, k)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return [np.flatnonzero(labels == c) for c in range(k)]


def fit_gaussian(features, indices, ridge=1e-6):
    """Sample mean and unbiased covariance (plus ``ridge * I``) of a cluster."""
    X = check_features(features)
    indices = np.asarray(indices, dtype=int)
    if indices.size == 0:
        raise EmptyClusterError("cannot fit a Gaussian to an empty cluster")
    pts = X[indices]
    q, d = pts.shape
    mu = pts.mean(axis=0)
    cov = np.zeros((d, d))
    if q > 1:
        dev = pts - mu
        cov = dev.T @ dev / (q - 1)
    cov = certify_spd(cov + ridge * np.eye(d))
    return GaussianCluster(mu, cov, q)


def gauss_to_spd(g, rho=1):
    """Embed a Gaussian as a unit-determinant SPD matrix of size ``d + rho``.

    The block matrix ``[[S + rho m m^T, m 1^T], [1 m^T, I_rho]]`` has
    determinant ``det(S)``; scaling it by ``det(S) ** (-1 / (d + rho))``
    brings the determinant to one.
    """
    if rho < 1:
        raise ValueError("rho must be at least 1")
    cov = certify_spd(g.covariance)
    mu = np.asarray(g.mean, dtype=float)
    d = mu.shape[0]
    if cov.shape != (d, d):
        raise DimensionMismatchError(f"mean of length {d} with covariance {cov.shape}")
    L = cholesky(cov)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    mu_r = np.outer(mu, np.ones(rho))
    block = np.block([
        [cov + rho * np.outer(mu, mu), mu_r],
        [mu_r.T, np.eye(rho)],
    ])
    return certify_spd(np.exp(-logdet / (d + rho)) * block)


class GaussianEmbedding(BaseEstimator, TransformerMixin):
    """Cluster a feature set and embed each cluster's Gaussian as SPD.

    ``transform`` takes one feature set (``n_samples x d``) and returns the
    stacked embeddings, shape ``(n_clusters, d + rho, d + rho)``. The fitted
    clusters of the last call are kept on ``clusters_`` and ``gaussians_``.
    """

    def __init__(self, n_clusters=30, n_iter=20, rho=1, ridge=1e-6, random_state=0):
        self.n_clusters = n_clusters
        self.n_iter = n_iter
        self.rho = rho
        self.ridge = ridge
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_features(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = check_features(X)
        if X.shape[0] == 0:
            raise EmptyInputError("empty feature set")
        self.clusters_ = kmeans(X, self.n_clusters, self.n_iter, self.random_state)
        self.gaussians_ = [fit_gaussian(X, idx, self.ridge) for idx in self.clusters_]
        return np.array([gauss_to_spd(g, self.rho) for g in self.gaussians_])
