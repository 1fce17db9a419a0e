import numpy as np
import pytest
from sklearn.base import clone

from lanemanifold.exceptions import DimensionMismatchError, EmptyClusterError, EmptyInputError
from lanemanifold.gaussian import GaussianCluster, GaussianEmbedding, fit_gaussian, gauss_to_spd, kmeans


class TestKMeans:
    def test_single_cluster(self, rng):
        X = rng.standard_normal((12, 3))
        (idx,) = kmeans(X, 1)
        assert np.array_equal(idx, np.arange(12))

    def test_separated_blobs(self):
        X = np.vstack([np.zeros((5, 3)), np.full((5, 3), 100.0)])
        clusters = sorted(kmeans(X, 2, seed=3), key=lambda c: c[0])
        assert [c.tolist() for c in clusters] == [[0, 1, 2, 3, 4], [5, 6, 7, 8, 9]]

    def test_deterministic(self, rng):
        X = rng.standard_normal((60, 3))
        a = kmeans(X, 30, seed=11)
        b = kmeans(X, 30, seed=11)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_clamps_and_never_empty(self):
        X = np.zeros((4, 2))
        clusters = kmeans(X, 10)
        assert len(clusters) == 4
        assert all(len(c) == 1 for c in clusters)
        assert sorted(np.concatenate(clusters).tolist()) == [0, 1, 2, 3]

    def test_partition(self, rng):
        X = rng.standard_normal((100, 3))
        clusters = kmeans(X, 7, seed=2)
        assert all(len(c) > 0 for c in clusters)
        assert sorted(np.concatenate(clusters).tolist()) == list(range(100))

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            kmeans(np.zeros((0, 3)), 2)


class TestFitGaussian:
    def test_single_point(self):
        g = fit_gaussian(np.array([[1.0, 2.0, 3.0]]), [0])
        assert np.allclose(g.mean, [1, 2, 3])
        assert np.allclose(g.covariance, 1e-6 * np.eye(3))
        assert g.count == 1

    def test_two_points(self):
        g = fit_gaussian(np.array([[1.0, 0, 0], [-1.0, 0, 0]]), [0, 1])
        assert np.allclose(g.mean, 0.0)
        assert np.allclose(g.covariance, np.diag([2.0, 0, 0]) + 1e-6 * np.eye(3))

    def test_monte_carlo(self, rng):
        A = rng.standard_normal((3, 3))
        cov = A @ A.T + np.eye(3)
        X = rng.multivariate_normal([1.0, -2.0, 0.5], cov, size=1000)
        g = fit_gaussian(X, np.arange(1000))
        assert np.linalg.norm(g.covariance - cov) <= 0.15 * np.linalg.norm(cov)
        assert np.allclose(g.covariance, np.cov(X.T) + 1e-6 * np.eye(3))

    def test_empty_cluster(self):
        with pytest.raises(EmptyClusterError):
            fit_gaussian(np.zeros((3, 2)), [])


class TestGaussToSpd:
    def test_standard_normal(self):
        for d in (1, 2, 3):
            P = gauss_to_spd(GaussianCluster(np.zeros(d), np.eye(d), 1))
            assert np.allclose(P, np.eye(d + 1))

    def test_block_assembly(self):
        mu = np.array([1.0, 0.0, 0.0])
        P = gauss_to_spd(GaussianCluster(mu, np.eye(3), 1))
        oracle = np.block([[np.eye(3) + np.outer(mu, mu), mu[:, None]], [mu[None, :], np.ones((1, 1))]])
        assert np.allclose(P, oracle)
        assert np.linalg.eigvalsh(P).min() > 0

    def test_scaling_and_rho(self, rng):
        A = rng.standard_normal((3, 3))
        cov = A @ A.T + 0.5 * np.eye(3)
        mu = rng.standard_normal(3)
        for rho in (1, 2, 3):
            P = gauss_to_spd(GaussianCluster(mu, cov, 5), rho)
            scale = np.linalg.det(cov) ** (-1.0 / (3 + rho))
            mr = np.outer(mu, np.ones(rho))
            block = np.block([[cov + rho * np.outer(mu, mu), mr], [mr.T, np.eye(rho)]])
            assert np.allclose(P, scale * block, rtol=1e-12)
            assert np.linalg.det(P) == pytest.approx(1.0, abs=1e-10)

    def test_errors(self):
        with pytest.raises(ValueError):
            gauss_to_spd(GaussianCluster(np.zeros(2), np.eye(2), 1), rho=0)
        with pytest.raises(DimensionMismatchError):
            gauss_to_spd(GaussianCluster(np.zeros(3), np.eye(2), 1))


def test_embedding_estimator(rng):
    X = rng.standard_normal((50, 3))
    est = GaussianEmbedding(n_clusters=5, random_state=4)
    assert clone(est).get_params() == est.get_params()
    out = est.fit_transform(X)
    assert out.shape == (5, 4, 4)
    assert np.allclose([np.linalg.det(P) for P in out], 1.0, atol=1e-10)
    assert sum(g.count for g in est.gaussians_) == 50
