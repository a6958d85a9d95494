import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import mc_kernel_samples, random_hyp
from gplvm_density.exceptions import InvalidInputError, NumericalError
from gplvm_density.kernels import (
    Hyperparams,
    ard_kernel,
    cross_covariance,
    downdate_inverse,
    expected_k,
    expected_kk,
    factorize_psd,
    kernel_matrix,
)


class TestHyperparams:
    def test_parameter_counts(self):
        hyp = Hyperparams([1.0, 2.0], 1.0, 0.1, [0.1, 0.2])
        assert hyp.to_log_vector().shape == (6,)
        assert hyp.to_log_vector(stochastic=False).shape == (4,)

    def test_log_round_trip(self, rng):
        hyp = random_hyp(rng, 3, stochastic=True)
        back = Hyperparams.from_log_vector(hyp.to_log_vector(), 3, True)
        np.testing.assert_allclose(back.lengthscales_sq, hyp.lengthscales_sq, rtol=1e-14)
        np.testing.assert_allclose(back.latent_var, hyp.latent_var, rtol=1e-14)
        assert back.signal_var == pytest.approx(hyp.signal_var, rel=1e-14)

    @pytest.mark.parametrize("kwargs", [
        dict(lengthscales_sq=[0.0], signal_var=1.0, noise_var=0.1),
        dict(lengthscales_sq=[1.0], signal_var=-1.0, noise_var=0.1),
        dict(lengthscales_sq=[1.0], signal_var=1.0, noise_var=0.0),
        dict(lengthscales_sq=[1.0], signal_var=1.0, noise_var=0.1, latent_var=[-1e-3]),
        dict(lengthscales_sq=[1.0, 1.0], signal_var=1.0, noise_var=0.1, latent_var=[0.1]),
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(InvalidInputError):
            Hyperparams(**kwargs)

    def test_zero_latent_var_is_deterministic(self):
        assert not Hyperparams([1.0], 1.0, 0.1).stochastic
        assert Hyperparams([1.0], 1.0, 0.1, [0.5]).stochastic

    def test_frozen_arrays(self):
        hyp = Hyperparams([1.0], 1.0, 0.1)
        with pytest.raises(ValueError):
            hyp.lengthscales_sq[0] = 2.0


class TestArdKernel:
    def test_same_index_adds_noise(self):
        assert ard_kernel([0.3], [0.3], Hyperparams([1.0], 1.0, 0.1), same_index=True) == pytest.approx(1.1)

    def test_distinct_indices_no_noise(self):
        assert ard_kernel([0.3], [0.3], Hyperparams([1.0], 1.0, 0.1)) == pytest.approx(1.0)

    def test_hand_value(self):
        # noise must be positive, so use a tiny one; it is not added off the diagonal
        got = ard_kernel([0.0], [2.0], Hyperparams([4.0], 2.0, 1e-12))
        assert got == pytest.approx(2.0 * np.exp(-0.5), rel=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            ard_kernel([0.0, 1.0], [0.0, 1.0], Hyperparams([1.0], 1.0, 0.1))

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.lists(st.floats(-5, 5), min_size=2, max_size=2))
    def test_symmetric_and_bounded(self, a, b):
        hyp = Hyperparams([0.7, 1.3], 1.5, 0.1)
        k = ard_kernel(a, b, hyp)
        assert k == ard_kernel(b, a, hyp)
        assert 0.0 <= k <= hyp.signal_var


class TestKernelMatrix:
    def test_single_point(self):
        np.testing.assert_allclose(kernel_matrix([[0.5]], Hyperparams([1.0], 2.0, 0.3)), [[2.3]])

    def test_identical_points(self):
        K = kernel_matrix([[1.0], [1.0]], Hyperparams([1.0], 2.0, 0.3))
        np.testing.assert_allclose(K, [[2.3, 2.0], [2.0, 2.3]])

    def test_noise_free_part_psd(self, rng):
        hyp = random_hyp(rng, 2)
        K = kernel_matrix(rng.standard_normal((5, 2)), hyp)
        assert np.linalg.eigvalsh(K - hyp.noise_var * np.eye(5)).min() >= -1e-10

    def test_matches_pairwise(self, rng):
        hyp = random_hyp(rng, 2)
        X = rng.standard_normal((4, 2))
        K = kernel_matrix(X, hyp)
        for i in range(4):
            for j in range(4):
                assert K[i, j] == pytest.approx(ard_kernel(X[i], X[j], hyp, same_index=i == j), rel=1e-13)

    def test_cross_covariance_is_noise_free(self, rng):
        hyp = random_hyp(rng, 2)
        X = rng.standard_normal((4, 2))
        np.testing.assert_allclose(cross_covariance(X, X[1], hyp)[1], hyp.signal_var)


class TestFactorizePsd:
    def test_identity(self):
        f = factorize_psd(np.eye(3))
        assert f.log_det == 0.0 and f.jitter_used == 0.0

    def test_diagonal_log_det(self):
        assert factorize_psd(np.diag([4.0, 9.0])).log_det == pytest.approx(np.log(36.0))

    def test_rank_deficient_needs_jitter(self):
        v = np.array([1.0, 2.0, -1.0, 0.5])
        f = factorize_psd(np.outer(v, v))
        assert f.jitter_used > 0
        L = f.lower_factor
        M = np.outer(v, v) + f.jitter_used * np.eye(4)
        assert np.linalg.norm(L @ L.T - M) / np.linalg.norm(M) <= 1e-8

    def test_reconstruction_and_log_det(self, rng):
        B = rng.standard_normal((6, 6))
        M = B @ B.T + np.eye(6)
        f = factorize_psd(M)
        assert np.linalg.norm(f.lower_factor @ f.lower_factor.T - M) / np.linalg.norm(M) <= 1e-8
        assert f.log_det == pytest.approx(2 * np.sum(np.log(np.diag(f.lower_factor))))
        np.testing.assert_allclose(f.solve(np.eye(6)) @ M, np.eye(6), atol=1e-10)

    def test_indefinite_fails(self):
        with pytest.raises(NumericalError) as err:
            factorize_psd(np.diag([1.0, -1.0]))
        assert err.value.jitter > 0


class TestDowndate:
    def test_diagonal(self):
        np.testing.assert_allclose(downdate_inverse(np.diag([1.0, 0.5, 1 / 3]), 1), np.diag([1.0, 1 / 3]))

    def test_two_by_two(self):
        K = np.array([[2.0, 0.5], [0.5, 3.0]])
        np.testing.assert_allclose(downdate_inverse(np.linalg.inv(K), 0), [[1 / 3.0]])

    def test_random_vs_reinversion(self, rng):
        B = rng.standard_normal((6, 6))
        K = B @ B.T + 0.5 * np.eye(6)
        K_inv = np.linalg.inv(K)
        for i in range(6):
            direct = np.linalg.inv(np.delete(np.delete(K, i, 0), i, 1))
            assert np.max(np.abs(downdate_inverse(K_inv, i) - direct)) <= 1e-10

    def test_not_pd(self):
        with pytest.raises(NumericalError):
            downdate_inverse(np.diag([1.0, -1.0]), 1)


class TestExpectedKernels:
    def test_zero_variance_limit_k(self, rng):
        hyp = random_hyp(rng, 2)
        X, xs = rng.standard_normal((5, 2)), rng.standard_normal(2)
        np.testing.assert_array_equal(expected_k(X, xs, hyp), cross_covariance(X, xs, hyp))

    def test_small_variance_limit_k(self, rng):
        hyp = random_hyp(rng, 2).with_latent_var([1e-14, 1e-14])
        X, xs = rng.standard_normal((5, 2)), rng.standard_normal(2)
        np.testing.assert_allclose(expected_k(X, xs, hyp), cross_covariance(X, xs, hyp), rtol=1e-10)

    def test_k_hand_value(self):
        hyp = Hyperparams([1.7], 2.5, 0.1, [1.7])
        assert expected_k([[0.4]], [0.4], hyp)[0] == pytest.approx(2.5 * 2 ** -0.5, rel=1e-14)

    def test_kk_zero_variance_limit(self, rng):
        hyp = random_hyp(rng, 2)
        X, xs = rng.standard_normal((5, 2)), rng.standard_normal(2)
        k = cross_covariance(X, xs, hyp)
        np.testing.assert_allclose(expected_kk(X, xs, hyp), np.outer(k, k))
        hyp = hyp.with_latent_var([1e-14, 1e-14])
        np.testing.assert_allclose(expected_kk(X, xs, hyp), np.outer(k, k), rtol=1e-10)

    def test_kk_hand_value(self):
        hyp = Hyperparams([0.8], 1.3, 0.1, [0.8])
        assert expected_kk([[0.2]], [0.2], hyp)[0, 0] == pytest.approx(1.3 ** 2 * 3 ** -0.5, rel=1e-14)

    @pytest.mark.parametrize("seed", range(3))
    def test_monte_carlo(self, seed):
        rng = np.random.default_rng(seed)
        hyp = random_hyp(rng, 2, stochastic=True)
        X, xs = rng.standard_normal((5, 2)), rng.standard_normal(2)
        _, k = mc_kernel_samples(X, xs, hyp, 200_000, rng)
        ek, ekk = expected_k(X, xs, hyp), expected_kk(X, xs, hyp)
        mk, mkk = k.mean(0), k.T @ k / len(k)
        big = np.abs(mk) > 1e-3
        assert np.all(np.abs(ek - mk)[big] / np.abs(mk[big]) <= 0.02)
        big = np.abs(mkk) > 1e-3
        assert np.all(np.abs(ekk - mkk)[big] / np.abs(mkk[big]) <= 0.05)

    def test_kk_is_psd_and_dominates(self, rng):
        hyp = random_hyp(rng, 2, stochastic=True)
        X, xs = rng.standard_normal((6, 2)), rng.standard_normal(2)
        k, kk = expected_k(X, xs, hyp), expected_kk(X, xs, hyp)
        # E[k k^T] - E[k] E[k]^T is a covariance matrix
        assert np.linalg.eigvalsh(kk - np.outer(k, k)).min() >= -1e-12

    def test_kk_far_from_data_underflows_gracefully(self):
        hyp = Hyperparams([0.01], 1.0, 0.1, [1e-4])
        kk = expected_kk([[0.0], [1.0]], [50.0], hyp)
        assert np.all(np.isfinite(kk)) and np.all(kk == 0)
