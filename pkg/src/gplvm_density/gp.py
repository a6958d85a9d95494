"""GP map conditioned on latent/observation pairs and its predictive moments."""

from dataclasses import dataclass
from typing import Union

import numpy as np

from .exceptions import InvalidInputError
from .kernels import (
    Hyperparams,
    PsdFactor,
    cross_covariance,
    downdate_inverse,
    expected_k,
    expected_kk,
    factorize_psd,
    kernel_matrix,
)

__all__ = [
    "GpConditioned",
    "PredictiveMoments",
    "condition",
    "predict_det",
    "predict_gauss",
    "predict_mean_loo",
    "floor_psd",
]

COV_FLOOR = 1e-10


@dataclass(frozen=True)
class GpConditioned:
    """D independent GPs sharing one kernel, conditioned on ``(X, Zbar)``.

    ``weights`` is the ``(N, D)`` matrix ``A = K^{-1} Zbar`` so that the
    predictive mean at a kernel vector ``k`` is ``A^T k``.
    """

    latents: np.ndarray
    targets: np.ndarray
    hyp: Hyperparams
    kernel_factor: PsdFactor
    weights: np.ndarray
    inverse: np.ndarray

    @property
    def n_points(self):
        return self.latents.shape[0]

    @property
    def n_outputs(self):
        return self.targets.shape[1]

    @property
    def prior_var(self):
        return self.hyp.signal_var + self.hyp.noise_var


@dataclass(frozen=True)
class PredictiveMoments:
    """Mean and covariance of a GP output; ``cov`` is a float for ``cov * I``."""

    mean: np.ndarray
    cov: Union[float, np.ndarray]

    @property
    def spherical(self):
        return np.ndim(self.cov) == 0

    def covariance_matrix(self):
        if self.spherical:
            return self.cov * np.eye(self.mean.shape[0])
        return self.cov


def floor_psd(S, floor=COV_FLOOR):
    """Symmetrize ``S`` and raise eigenvalues below ``floor`` to ``floor``."""
    S = 0.5 * (S + S.T)
    evals, evecs = np.linalg.eigh(S)
    if evals[0] >= floor:
        return S
    return (evecs * np.maximum(evals, floor)) @ evecs.T


def condition(X, Zbar, hyp):
    """Condition the GP map on latent points ``X`` (N, d) and targets ``Zbar`` (N, D)."""
    X = np.asarray(X, dtype=float)
    Zbar = np.asarray(Zbar, dtype=float)
    if X.ndim != 2 or Zbar.ndim != 2 or X.shape[0] != Zbar.shape[0]:
        raise InvalidInputError("X and Zbar must be 2-D with the same number of rows")
    if not np.all(np.isfinite(Zbar)):
        raise InvalidInputError("Zbar contains non-finite values")
    K = kernel_matrix(X, hyp)
    factor = factorize_psd(K)
    K_inv = factor.inverse()
    A = factor.solve(Zbar)
    return GpConditioned(X, Zbar, hyp, factor, A, K_inv)


def predict_det(gp, xstar):
    """Moments of ``f(xstar)`` for a deterministic input; covariance is spherical."""
    k = cross_covariance(gp.latents, xstar, gp.hyp)
    mean = gp.weights.T @ k
    var = gp.prior_var - k @ gp.kernel_factor.solve(k)
    return PredictiveMoments(mean, float(var))


def predict_gauss(gp, xstar, hyp=None):
    """Moment-matched output for ``x ~ N(xstar, diag(latent_var))``.

    The covariance is ``(k** - tr(K^-1 Khat)) I + A^T (Khat - kt kt^T) A``,
    symmetrized and floored at ``1e-10``.
    """
    hyp = gp.hyp if hyp is None else hyp
    kt = expected_k(gp.latents, xstar, hyp)
    Khat = expected_kk(gp.latents, xstar, hyp)
    A = gp.weights
    mean = A.T @ kt
    iso = gp.prior_var - np.sum(gp.inverse * Khat)
    cov = iso * np.eye(A.shape[1]) + A.T @ (Khat - np.outer(kt, kt)) @ A
    return PredictiveMoments(mean, floor_psd(cov))


def predict_mean_loo(gp, xstar, i, expected=False):
    """Predictive mean at ``xstar`` with the pair ``(x^i, z^i)`` removed.

    ``K^{-1}`` is downdated rather than refactorized. With ``expected=True``
    the expected kernel vector of a Gaussian input is used.
    """
    n = gp.n_points
    if n < 2:
        raise InvalidInputError("leave-one-out prediction needs at least two points")
    if not 0 <= i < n:
        raise InvalidInputError(f"index {i} out of range for {n} points")
    k = expected_k(gp.latents, xstar, gp.hyp) if expected else cross_covariance(gp.latents, xstar, gp.hyp)
    keep = np.arange(n) != i
    inv = downdate_inverse(gp.inverse, i)
    return gp.targets[keep].T @ (inv @ k[keep])
