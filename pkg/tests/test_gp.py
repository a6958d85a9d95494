import numpy as np
import pytest

from conftest import mc_kernel_samples, random_hyp, rel_fro
from gplvm_density.exceptions import InvalidInputError
from gplvm_density.gp import condition, floor_psd, predict_det, predict_gauss, predict_mean_loo
from gplvm_density.kernels import Hyperparams, kernel_matrix


def mc_moments(gp, xstar, n, rng):
    """Law-of-total-covariance oracle for f(x), x ~ N(xstar, V)."""
    _, k = mc_kernel_samples(gp.latents, xstar, gp.hyp, n, rng)
    means = k @ gp.weights
    var = gp.prior_var - np.sum((k @ gp.inverse) * k, axis=1)
    mu = means.mean(0)
    cov = var.mean() * np.eye(means.shape[1]) + np.cov(means.T, bias=True)
    return mu, cov


class TestCondition:
    def test_zero_target(self):
        gp = condition([[0.3]], [[0.0, 0.0]], Hyperparams([1.0], 1.0, 0.1))
        np.testing.assert_array_equal(gp.weights, 0.0)

    def test_single_point_large_noise(self):
        hyp = Hyperparams([1.0], 1.0, 1e6)
        gp = condition([[0.0]], [[3.0, -2.0]], hyp)
        np.testing.assert_allclose(gp.weights, [[3.0, -2.0]] / np.float64(1.0 + 1e6), rtol=1e-12)

    def test_reconstruction(self, rng):
        hyp = random_hyp(rng, 2)
        X, Z = rng.standard_normal((6, 2)), rng.standard_normal((6, 3))
        gp = condition(X, Z, hyp)
        assert np.max(np.abs(kernel_matrix(X, hyp) @ gp.weights - Z)) <= 1e-8

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            condition(np.zeros((3, 1)), np.zeros((2, 2)), Hyperparams([1.0], 1.0, 0.1))


class TestPredictDet:
    def test_interpolates_training_point(self, rng):
        hyp = Hyperparams([1.0, 1.0], 1.0, 1e-9)
        X, Z = rng.standard_normal((5, 2)), rng.standard_normal((5, 3))
        gp = condition(X, Z, hyp)
        np.testing.assert_allclose(predict_det(gp, X[2]).mean, Z[2], atol=1e-6)

    def test_far_away_recovers_prior(self, rng):
        hyp = random_hyp(rng, 2)
        gp = condition(rng.standard_normal((5, 2)), rng.standard_normal((5, 3)), hyp)
        m = predict_det(gp, [1e3, 1e3])
        np.testing.assert_allclose(m.mean, 0.0, atol=1e-300)
        assert m.cov == pytest.approx(hyp.signal_var + hyp.noise_var)

    @pytest.mark.parametrize("seed", range(5))
    def test_variance_bracket(self, seed):
        rng = np.random.default_rng(seed)
        hyp = random_hyp(rng, 2)
        gp = condition(rng.standard_normal((6, 2)), rng.standard_normal((6, 3)), hyp)
        for x in rng.standard_normal((10, 2)):
            v = predict_det(gp, x).cov
            assert hyp.noise_var <= v <= hyp.noise_var + hyp.signal_var


class TestPredictGauss:
    def test_deterministic_limit(self, rng):
        hyp = random_hyp(rng, 2).with_latent_var([1e-12, 1e-12])
        gp = condition(rng.standard_normal((6, 2)), rng.standard_normal((6, 3)), hyp)
        xs = rng.standard_normal(2)
        g, d = predict_gauss(gp, xs), predict_det(gp, xs)
        assert np.max(np.abs(g.mean - d.mean)) <= 1e-6
        assert np.max(np.abs(g.covariance_matrix() - d.covariance_matrix())) <= 1e-6

    def test_zero_targets_give_isotropic_cov(self, rng):
        hyp = random_hyp(rng, 2, stochastic=True)
        X = rng.standard_normal((5, 2))
        gp = condition(X, np.zeros((5, 3)), hyp)
        from gplvm_density.kernels import expected_kk
        m = predict_gauss(gp, X[0])
        iso = hyp.signal_var + hyp.noise_var - np.sum(gp.inverse * expected_kk(X, X[0], hyp))
        np.testing.assert_allclose(m.cov, iso * np.eye(3), rtol=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_monte_carlo_moments(self, seed):
        rng = np.random.default_rng(100 + seed)
        hyp = random_hyp(rng, 2, stochastic=True)
        gp = condition(rng.standard_normal((8, 2)), rng.standard_normal((8, 3)), hyp)
        xs = rng.standard_normal(2)
        mu, cov = mc_moments(gp, xs, 200_000, rng)
        m = predict_gauss(gp, xs)
        assert rel_fro(m.mean, mu) <= 0.02
        assert rel_fro(m.cov, cov) <= 0.05

    def test_full_covariance_is_pd(self, rng):
        hyp = random_hyp(rng, 2, stochastic=True)
        gp = condition(rng.standard_normal((6, 2)), rng.standard_normal((6, 3)), hyp)
        m = predict_gauss(gp, rng.standard_normal(2))
        assert not m.spherical
        assert np.linalg.eigvalsh(m.cov).min() > 0


class TestPredictMeanLoo:
    def test_two_points(self, rng):
        hyp = random_hyp(rng, 1)
        X, Z = rng.standard_normal((2, 1)), rng.standard_normal((2, 2))
        gp = condition(X, Z, hyp)
        xs = rng.standard_normal(1)
        np.testing.assert_allclose(predict_mean_loo(gp, xs, 1), predict_det(condition(X[:1], Z[:1], hyp), xs).mean,
                                   rtol=1e-12)

    def test_duplicate_point_is_redundant(self, rng):
        # with negligible noise the twin carries the same information
        hyp = Hyperparams([1.0, 1.0], 1.0, 1e-9)
        X, Z = rng.standard_normal((5, 2)), rng.standard_normal((5, 3))
        X, Z = np.vstack([X, X[1]]), np.vstack([Z, Z[1]])
        gp = condition(X, Z, hyp)
        for xs in rng.standard_normal((5, 2)):
            assert np.max(np.abs(predict_mean_loo(gp, xs, 5) - predict_det(gp, xs).mean)) <= 1e-6

    @pytest.mark.parametrize("seed", range(5))
    def test_vs_recompute(self, seed):
        rng = np.random.default_rng(seed)
        hyp = random_hyp(rng, 2)
        X, Z = rng.standard_normal((7, 2)), rng.standard_normal((7, 3))
        gp = condition(X, Z, hyp)
        for xs in rng.standard_normal((4, 2)):
            for i in range(7):
                ref = predict_det(condition(np.delete(X, i, 0), np.delete(Z, i, 0), hyp), xs).mean
                assert np.max(np.abs(predict_mean_loo(gp, xs, i) - ref)) <= 1e-8

    def test_needs_two_points(self):
        gp = condition([[0.0]], [[1.0]], Hyperparams([1.0], 1.0, 0.1))
        with pytest.raises(InvalidInputError):
            predict_mean_loo(gp, [0.0], 0)


def test_floor_psd():
    S = np.array([[1.0, 0.0], [0.0, -1e-3]])
    F = floor_psd(S)
    assert np.linalg.eigvalsh(F).min() == pytest.approx(1e-10)
    np.testing.assert_array_equal(floor_psd(np.eye(2)), np.eye(2))
