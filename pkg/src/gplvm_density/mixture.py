"""Projected Gaussian mixture: latent components pushed through the GP map."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .exceptions import InvalidInputError, NumericalError
from .gp import condition, floor_psd, predict_gauss
from .kernels import Hyperparams

__all__ = ["ModelState", "ProjectedMixture", "project_mixture", "mixture_log_density"]

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class ModelState:
    """Latent points, hyperparameters and the training data they explain.

    The GP targets are the training data themselves, so ``targets`` has one
    row per latent point.
    """

    latents: np.ndarray
    hyp: Hyperparams
    targets: np.ndarray

    def __post_init__(self):
        X = np.array(self.latents, dtype=float, ndmin=2)
        Z = np.array(self.targets, dtype=float, ndmin=2)
        if X.shape[0] != Z.shape[0]:
            raise InvalidInputError(
                f"{X.shape[0]} latent points but {Z.shape[0]} target rows"
            )
        if X.shape[1] != self.hyp.n_latent:
            raise InvalidInputError("latent dimension does not match hyperparameters")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Z))):
            raise InvalidInputError("latents and targets must be finite")
        object.__setattr__(self, "latents", X)
        object.__setattr__(self, "targets", Z)

    @property
    def n_points(self):
        return self.latents.shape[0]

    @property
    def n_outputs(self):
        return self.targets.shape[1]

    @property
    def stochastic(self):
        return self.hyp.stochastic

    def replace(self, latents=None, hyp=None):
        return ModelState(
            self.latents if latents is None else latents,
            self.hyp if hyp is None else hyp,
            self.targets,
        )


@dataclass(frozen=True)
class ProjectedMixture:
    """Uniform-weight Gaussian mixture.

    ``covs`` has shape ``(N,)`` for spherical components (``cov_j * I``) or
    ``(N, D, D)`` for full covariances.
    """

    means: np.ndarray
    covs: np.ndarray

    @property
    def n_components(self):
        return self.means.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]

    @property
    def spherical(self):
        return self.covs.ndim == 1

    @property
    def weights(self):
        return np.full(self.n_components, 1.0 / self.n_components)

    def component_log_densities(self, Z):
        """Log density of every row of ``Z`` under every component, ``(M, N)``."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if Z.shape[1] != self.dim:
            raise InvalidInputError(f"points have dimension {Z.shape[1]}, mixture has {self.dim}")
        R = Z[:, None, :] - self.means[None, :, :]
        D = self.dim
        if self.spherical:
            if not np.all(self.covs > 0):
                raise NumericalError("spherical component variance is not positive")
            quad = np.sum(R * R, axis=-1) / self.covs
            return -0.5 * (D * (LOG_2PI + np.log(self.covs)) + quad)
        out = np.empty(R.shape[:2])
        for j, S in enumerate(self.covs):
            try:
                L = np.linalg.cholesky(S)
            except np.linalg.LinAlgError as exc:
                raise NumericalError(f"component {j} covariance is not positive definite") from exc
            y = solve_triangular(L, R[:, j, :].T, lower=True, check_finite=False)
            logdet = 2.0 * np.sum(np.log(np.diag(L)))
            out[:, j] = -0.5 * (D * LOG_2PI + logdet + np.sum(y * y, axis=0))
        return out

    def log_density(self, Z):
        comp = self.component_log_densities(Z)
        return logsumexp(comp, axis=1) - np.log(self.n_components)


def project_mixture(model):
    """Push the latent mixture forward through the GP conditioned on the model.

    Deterministic latents give spherical components with variance
    ``k** - k^T K^-1 k``; Gaussian latents give full moment-matched
    covariances. One conditioning is shared by all components.
    """
    gp = condition(model.latents, model.targets, model.hyp)
    hyp = model.hyp
    if not hyp.stochastic:
        X = model.latents
        diff = X[:, None, :] - X[None, :, :]
        Kf = hyp.signal_var * np.exp(-0.5 * np.sum(diff * diff / hyp.lengthscales_sq, axis=-1))
        means = Kf.T @ gp.weights
        # k_j = K e_j - s e_j at a training latent, so the variance needs no cancellation
        s = hyp.noise_var + gp.kernel_factor.jitter_used
        var = hyp.noise_var + s * (1.0 - s * np.diag(gp.inverse))
        return ProjectedMixture(means, var)
    moments = [predict_gauss(gp, x) for x in model.latents]
    means = np.array([m.mean for m in moments])
    covs = np.array([floor_psd(m.cov) for m in moments])
    return ProjectedMixture(means, covs)


def mixture_log_density(mix, z):
    """Log density of ``z`` (shape ``(D,)`` or ``(M, D)``) under ``mix``."""
    z = np.asarray(z, dtype=float)
    out = mix.log_density(np.atleast_2d(z))
    return float(out[0]) if z.ndim == 1 else out
